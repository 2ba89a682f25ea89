#ifndef CTRAK_COMMON_HPP
#define CTRAK_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctrak {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Config file problems: bad syntax, missing/unknown fields. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Artifacts produced under a different config were fed together. CLI exit code 3.
struct FingerprintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, failed factorizations. CLI exit code 4.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StorageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Duplicate sample id on append.
struct ConflictError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace ctrak

#endif
