#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tblstm {

// Dimension/shape violations (matmul inner mismatch, bad broadcast, ...).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid model or run configuration (heads not dividing H, missing projection, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API contract violations (non-scalar loss, empty mask set, label out of range).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Token/segment id outside the vocabulary or table range.
struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint file corruption, version mismatch, truncation.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A forward operation produced NaN/Inf while numeric checks were enabled.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Global switch for the post-op finite scan. Tests and `gradcheck` turn it on;
// training loops rely on the per-step loss check instead and leave it off in
// release builds.
inline bool& finite_checks() {
#ifdef NDEBUG
    static bool enabled = false;
#else
    static bool enabled = true;
#endif
    return enabled;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

}  // namespace tblstm
