"""Parameter profiles: flat ``key = value`` text, one key per line, ``#`` comments.

Required keys: alpha_db_per_km, eta_bob, y0, e_detector.
Optional keys: f_ec, gllp_f_ec, q_protocol, mu_cap, distance_cap_km.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .channel import ChannelModel
from .errors import ParseError
from .keyrate import RateSettings

CHANNEL_KEYS = {
    "alpha_db_per_km": "alpha",
    "eta_bob": "eta_bob",
    "y0": "y0",
    "e_detector": "e_detector",
}
SETTINGS_KEYS = ("f_ec", "gllp_f_ec", "q_protocol", "mu_cap", "distance_cap_km")
BUILTIN_PROFILES = ("gys",)


@dataclass(frozen=True)
class Profile:
    channel: ChannelModel
    settings: RateSettings
    source: str = "<memory>"


def parse_profile(text: str, source: str = "<string>") -> Profile:
    values: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", path=source, line=lineno)
        key, _, raw = (part.strip() for part in line.partition("="))
        if key not in CHANNEL_KEYS and key not in SETTINGS_KEYS:
            raise ParseError(f"unknown key {key!r}", path=source, line=lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", path=source, line=lineno)
        try:
            values[key] = float(raw)
        except ValueError:
            raise ParseError(f"{key}: {raw!r} is not a number", path=source, line=lineno) from None

    missing = [k for k in CHANNEL_KEYS if k not in values]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}", path=source)
    try:
        model = ChannelModel(**{CHANNEL_KEYS[k]: values[k] for k in CHANNEL_KEYS})
        settings = RateSettings(**{k: values[k] for k in SETTINGS_KEYS if k in values})
    except ValueError as exc:
        raise ParseError(str(exc), path=source) from None
    return Profile(channel=model, settings=settings, source=source)


def load_profile(path_or_name) -> Profile:
    """Load a profile file, or a built-in profile by name (``"gys"``)."""
    if str(path_or_name) in BUILTIN_PROFILES:
        name = f"{path_or_name}.profile"
        text = resources.files("decoyqkd").joinpath("profiles", name).read_text()
        return parse_profile(text, source=f"builtin:{path_or_name}")
    path = Path(path_or_name)
    return parse_profile(path.read_text(), source=str(path))


def gys() -> Profile:
    return load_profile("gys")
