#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace contact_imm {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int R, int C>
using Mat = Eigen::Matrix<double, R, C>;

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kStateDim = 12;
inline constexpr int kMeasDim = 15;
inline constexpr int kNumLegs = 4;

using StateVec = Vec<kStateDim>;
using StateMat = Mat<kStateDim, kStateDim>;
using MeasVec = Vec<kMeasDim>;
using MeasMat = Mat<kMeasDim, kMeasDim>;
using ObsMat = Mat<kMeasDim, kStateDim>;

// Block offsets of the stacked trunk state [theta; d; omega; v].
inline constexpr int kThetaIdx = 0;
inline constexpr int kPosIdx = 3;
inline constexpr int kOmegaIdx = 6;
inline constexpr int kVelIdx = 9;

// Block offsets of the stacked measurement [theta; p~; omega_bf; v~; a_bf].
inline constexpr int kMeasThetaIdx = 0;
inline constexpr int kMeasPosIdx = 3;
inline constexpr int kMeasOmegaIdx = 6;
inline constexpr int kMeasVelIdx = 9;
inline constexpr int kMeasAccelIdx = 12;

enum class Leg : int { FL = 0, FR = 1, RL = 2, RR = 3 };

inline constexpr std::array<Leg, kNumLegs> kLegs{Leg::FL, Leg::FR, Leg::RL, Leg::RR};

constexpr int index_of(Leg leg) { return static_cast<int>(leg); }

constexpr std::string_view leg_name(Leg leg) {
  switch (leg) {
    case Leg::FL: return "FL";
    case Leg::FR: return "FR";
    case Leg::RL: return "RL";
    case Leg::RR: return "RR";
  }
  return "??";
}

inline std::optional<Leg> parse_leg(std::string_view name) {
  for (Leg leg : kLegs) {
    if (leg_name(leg) == name) return leg;
  }
  return std::nullopt;
}

template <typename T>
using PerLeg = std::array<T, kNumLegs>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularJacobian : public Error {
 public:
  using Error::Error;
};
class NonFiniteState : public Error {
 public:
  using Error::Error;
};
class NonFiniteMeasurement : public Error {
 public:
  using Error::Error;
};
class SingularInnovation : public Error {
 public:
  using Error::Error;
};
class DegenerateBank : public Error {
 public:
  using Error::Error;
};
class InvalidProbability : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace contact_imm
