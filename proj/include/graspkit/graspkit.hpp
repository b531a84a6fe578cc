#ifndef GRASPKIT_GRASPKIT_HPP
#define GRASPKIT_GRASPKIT_HPP

#include "graspkit/math.hpp"
#include "graspkit/random.hpp"
#include "graspkit/error.hpp"
#include "graspkit/mesh.hpp"
#include "graspkit/bvh.hpp"
#include "graspkit/hand.hpp"
#include "graspkit/contact.hpp"
#include "graspkit/codec.hpp"
#include "graspkit/conversation.hpp"
#include "graspkit/metrics.hpp"
#include "graspkit/pipeline.hpp"

#endif
