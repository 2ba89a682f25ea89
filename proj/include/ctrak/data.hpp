#ifndef CTRAK_DATA_HPP
#define CTRAK_DATA_HPP

#include <cstdint>

#include "ctrak/common.hpp"

namespace ctrak {

// One training image. style_id is benchmark bookkeeping only; the model is
// conditioned on concept_id and never sees style_id.
struct DataPoint {
    Vec x0;                  // flattened image, values in [-1, 1]
    int concept_id = 0;      // conditioning label
    int style_id = 0;        // nuisance label
    std::int64_t sample_id = 0;
};

struct NoisyState {
    Vec xt;
    int t = 0;
};

}  // namespace ctrak

#endif
