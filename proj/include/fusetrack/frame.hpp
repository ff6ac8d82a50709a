#ifndef FUSETRACK_FRAME_HPP
#define FUSETRACK_FRAME_HPP

#include "fusetrack/geometry.hpp"

namespace fusetrack {

/// Everything the pipeline needs to know about one frame of a sequence.
struct FrameContext {
    int frame = 0;
    double timestamp = 0.0;  // seconds, strictly increasing across a sequence
    CameraIntrinsics intrinsics;
    EgoPose ego;
    GroundPlane plane;
};

}  // namespace fusetrack

#endif
