#pragma once

#include <stdexcept>
#include <string>

namespace kfr {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateLandmarks : Error {
    explicit DegenerateLandmarks(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

struct PyramidMismatch : Error {
    explicit PyramidMismatch(const std::string& msg) : Error(msg) {}
};

struct ScaleCountMismatch : Error {
    explicit ScaleCountMismatch(const std::string& msg) : Error(msg) {}
};

struct MissingWeight : Error {
    explicit MissingWeight(const std::string& msg) : Error(msg) {}
};

struct ZeroMatrix : Error {
    explicit ZeroMatrix(const std::string& msg) : Error(msg) {}
};

struct NonFiniteInput : Error {
    explicit NonFiniteInput(const std::string& msg) : Error(msg) {}
};

struct EmptyStore : Error {
    explicit EmptyStore(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct MissingFile : Error {
    explicit MissingFile(const std::string& msg) : Error(msg) {}
};

struct TooSmall : Error {
    explicit TooSmall(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace kfr
