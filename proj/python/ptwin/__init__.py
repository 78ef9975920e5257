"""Python bindings for the plant-factory digital twin."""

from ._core import (
    Twin,
    TwinError,
    compose_panorama,
    extract_view,
    inverse_distance,
    pick,
    render_cylinder_frame,
    run_script_files,
    severity,
)

__all__ = [
    "Twin",
    "TwinError",
    "compose_panorama",
    "extract_view",
    "inverse_distance",
    "pick",
    "render_cylinder_frame",
    "run_script_files",
    "severity",
    "devices",
    "readings",
    "interpolate",
    "command",
]


def devices(twin):
    return twin.iot_request("GET", "/v1/devices")


def readings(twin, kind=None):
    query = {"kind": kind} if kind else {}
    return twin.iot_request("GET", "/v1/readings", query=query)["readings"]


def interpolate(twin, kind, position):
    return twin.iot_request("POST", "/v1/interpolate", {"kind": kind, "position": list(position)})


def command(twin, actuator_id, mode, **extra):
    directive = {"mode": mode, **extra}
    return twin.iot_request("POST", f"/v1/actuators/{actuator_id}/command", directive)
