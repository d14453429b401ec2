#ifndef QS_ERRORS_HPP
#define QS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qs {

// Error classes map 1:1 to CLI exit codes (value of the enum).
enum class ErrorClass {
    Config = 2,
    Domain = 3,
    Shape = 4,
    State = 5,
    Degenerate = 6,
    Completeness = 7,
    Solver = 8,
    Calibration = 9,
    Training = 10,
    Model = 11,
    Dependency = 12,
    Staleness = 13,
    Format = 14,
    Integrity = 15,
    Compatibility = 16,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg)
        : std::runtime_error(msg), cls_(cls) {}

    ErrorClass cls() const { return cls_; }
    int exit_code() const { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

inline const char* error_class_name(ErrorClass cls) {
    switch (cls) {
        case ErrorClass::Config: return "config";
        case ErrorClass::Domain: return "domain";
        case ErrorClass::Shape: return "shape";
        case ErrorClass::State: return "state";
        case ErrorClass::Degenerate: return "degenerate";
        case ErrorClass::Completeness: return "completeness";
        case ErrorClass::Solver: return "solver";
        case ErrorClass::Calibration: return "calibration";
        case ErrorClass::Training: return "training";
        case ErrorClass::Model: return "model";
        case ErrorClass::Dependency: return "dependency";
        case ErrorClass::Staleness: return "staleness";
        case ErrorClass::Format: return "format";
        case ErrorClass::Integrity: return "integrity";
        case ErrorClass::Compatibility: return "compatibility";
    }
    return "unknown";
}

} // namespace qs

#endif // QS_ERRORS_HPP
