#pragma once

// Training runs in single precision. Building with VAELAB_FLOAT64 switches the
// whole numeric core to double, which is what the gradient checks link against.
// The two builds live in different inline namespaces so one program can link both.
#ifdef VAELAB_FLOAT64
#define VAELAB_NS f64
#else
#define VAELAB_NS f32
#endif

namespace vaelab::inline VAELAB_NS {

#ifdef VAELAB_FLOAT64
using Real = double;
#else
using Real = float;
#endif

}  // namespace vaelab::inline VAELAB_NS
