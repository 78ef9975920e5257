#include "ptwin/error.h"

#include <array>
#include <utility>

namespace ptwin {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 24> kNames{{
    {ErrorCode::UnknownFieldKind, "UnknownFieldKind"},
    {ErrorCode::OutOfExtent, "OutOfExtent"},
    {ErrorCode::UnknownActuator, "UnknownActuator"},
    {ErrorCode::InvalidDirective, "InvalidDirective"},
    {ErrorCode::NoSensorsOfKind, "NoSensorsOfKind"},
    {ErrorCode::EmptyFrameSet, "EmptyFrameSet"},
    {ErrorCode::DuplicateYaw, "DuplicateYaw"},
    {ErrorCode::UncoveredRegion, "UncoveredRegion"},
    {ErrorCode::BackendUnavailable, "BackendUnavailable"},
    {ErrorCode::InvariantViolation, "InvariantViolation"},
    {ErrorCode::MalformedImage, "MalformedImage"},
    {ErrorCode::MissingTargetRange, "MissingTargetRange"},
    {ErrorCode::UnknownSession, "UnknownSession"},
    {ErrorCode::UnknownObject, "UnknownObject"},
    {ErrorCode::ClientLocalCommand, "ClientLocalCommand"},
    {ErrorCode::MalformedCommand, "MalformedCommand"},
    {ErrorCode::MalformedRequest, "MalformedRequest"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::IotUnreachable, "IotUnreachable"},
    {ErrorCode::IotRejected, "IotRejected"},
    {ErrorCode::InvalidScenario, "InvalidScenario"},
    {ErrorCode::PortInUse, "PortInUse"},
    {ErrorCode::ServerUnreachable, "ServerUnreachable"},
    {ErrorCode::AssertionFailed, "AssertionFailed"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return std::nullopt;
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownActuator:
    case ErrorCode::UnknownFieldKind:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownObject:
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::InvalidDirective:
    case ErrorCode::OutOfExtent:
    case ErrorCode::MalformedImage:
    case ErrorCode::ClientLocalCommand:
    case ErrorCode::MalformedCommand:
    case ErrorCode::MissingTargetRange:
    case ErrorCode::DuplicateYaw:
    case ErrorCode::EmptyFrameSet:
        return 422;
    case ErrorCode::NoSensorsOfKind:
    case ErrorCode::UncoveredRegion:
        return 409;
    case ErrorCode::MalformedRequest:
        return 400;
    case ErrorCode::IotUnreachable:
    case ErrorCode::IotRejected:
    case ErrorCode::ServerUnreachable:
        return 502;
    case ErrorCode::BackendUnavailable:
        return 503;
    default:
        return 500;
    }
}

Error::Error(ErrorCode code, const std::string& message, std::string where)
    : std::runtime_error(message), code_(code), where_(std::move(where)) {}

}  // namespace ptwin
