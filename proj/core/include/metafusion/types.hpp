#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace metafusion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy shared by all modules. Each condition named in a module
// contract maps onto one of these.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularSystem : Error {
    explicit SingularSystem(const std::string& msg) : Error(msg) {}
};
struct InvalidRank : Error {
    explicit InvalidRank(const std::string& msg) : Error(msg) {}
};
struct TooFewPoints : Error {
    explicit TooFewPoints(const std::string& msg) : Error(msg) {}
};
struct SingleCluster : Error {
    explicit SingleCluster(const std::string& msg) : Error(msg) {}
};
struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};
struct InvalidDims : Error {
    explicit InvalidDims(const std::string& msg) : Error(msg) {}
};
struct NotFitted : Error {
    explicit NotFitted(const std::string& msg) : Error(msg) {}
};
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};
struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& msg) : Error(msg) {}
};
struct EmptyPool : Error {
    explicit EmptyPool(const std::string& msg) : Error(msg) {}
};
struct MethodTaskMismatch : Error {
    explicit MethodTaskMismatch(const std::string& msg) : Error(msg) {}
};
struct UnknownPreset : Error {
    explicit UnknownPreset(const std::string& msg) : Error(msg) {}
};

}  // namespace metafusion
