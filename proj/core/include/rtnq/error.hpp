// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rtnq {

// Base for everything this library throws. The CLI maps subclasses to exit
// codes: PlanError -> 2, IoError/CorruptDataError -> 3, anything else -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values, out-of-domain arguments, insufficient data.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

// Dimension mismatches, group/shape incompatibilities.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad magic, truncated buffers, out-of-range codes, malformed records.
class CorruptDataError : public Error {
public:
    using Error::Error;
};

// Plan text or plan/model resolution failures. Parse failures carry the byte
// offset of the offending character in the plan string; resolution failures
// (no text position) use offset npos.
class PlanError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    PlanError(const std::string& msg, std::size_t byte_offset = npos)
        : Error(byte_offset == npos ? msg
                                    : msg + " at byte " + std::to_string(byte_offset)),
          offset_(byte_offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Filesystem-level failures (open/read/write/stat).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rtnq
