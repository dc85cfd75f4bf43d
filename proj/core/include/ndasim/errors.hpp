#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ndasim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Command is structurally impossible for the current bank status.
class IllegalCommand : public Error {
public:
    using Error::Error;
};

class TimingViolation : public Error {
public:
    TimingViolation(std::string rule, std::int64_t deficit)
        : Error("timing violation: " + rule + " short by " + std::to_string(deficit) + " cycles"),
          rule_(std::move(rule)),
          deficit_(deficit) {}

    const std::string& rule() const { return rule_; }
    std::int64_t deficit() const { return deficit_; }

private:
    std::string rule_;
    std::int64_t deficit_;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class OutOfColorCapacity : public Error {
public:
    using Error::Error;
};

class LocalityViolation : public Error {
public:
    using Error::Error;
};

class BoundsViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config error [" + field + "]: " + what), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class DesyncDetected : public Error {
public:
    using Error::Error;
};

class DivergenceDetected : public Error {
public:
    using Error::Error;
};

class MismatchedPairing : public Error {
public:
    using Error::Error;
};

}  // namespace ndasim
