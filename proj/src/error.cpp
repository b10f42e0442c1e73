#include "tow/error.hpp"

namespace tow {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::StencilTooSmall: return "StencilTooSmall";
        case ErrorCode::NoWitness: return "NoWitness";
        case ErrorCode::Incompatible: return "Incompatible";
        case ErrorCode::OutOfDomain: return "OutOfDomain";
        case ErrorCode::NonStabilizing: return "NonStabilizing";
        case ErrorCode::DegenerateGradient: return "DegenerateGradient";
        case ErrorCode::IllegalMove: return "IllegalMove";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::CFLViolation: return "CFLViolation";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace tow
