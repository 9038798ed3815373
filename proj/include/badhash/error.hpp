#pragma once

#include <stdexcept>
#include <string>

namespace badhash {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LoadError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class CapacityError : public Error { public: using Error::Error; };
class BoundsError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// Raised when a loss goes non-finite; the message carries epoch/step context.
class TrainingError : public Error { public: using Error::Error; };

// Wraps a failure inside one pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace badhash
