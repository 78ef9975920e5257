#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ptwin {

enum class ErrorCode {
    UnknownFieldKind,
    OutOfExtent,
    UnknownActuator,
    InvalidDirective,
    NoSensorsOfKind,
    EmptyFrameSet,
    DuplicateYaw,
    UncoveredRegion,
    BackendUnavailable,
    InvariantViolation,
    MalformedImage,
    MissingTargetRange,
    UnknownSession,
    UnknownObject,
    ClientLocalCommand,
    MalformedCommand,
    MalformedRequest,
    NotFound,
    IotUnreachable,
    IotRejected,
    InvalidScenario,
    PortInUse,
    ServerUnreachable,
    AssertionFailed,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view name);

// HTTP status used when the error crosses a wire boundary.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string where = {});

    ErrorCode code() const noexcept { return code_; }
    // JSON pointer, step index or origin tag, depending on who raised it.
    const std::string& where() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::string where_;
};

}  // namespace ptwin
