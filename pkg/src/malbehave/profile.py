r"""Behavior profiles: XML trace format, data model, and feature tokens.

A profile is the recorded execution of one process: a ``<Meta>`` block
(sample hash, process id, capture duration) followed by an ``<Execution>``
block with one XML element per API call, for example::

    <CreateFile hName="C:\tmp\a.exe" desiredAccess="GENERIC_WRITE"
                Return="SUCCESS" Time="317560000" />

``Return`` and ``Time`` are reserved attribute names: ``Return`` carries the
call's return value and ``Time`` its timestamp in 100-ns ticks. Everything
else is treated as a call parameter. Spawned processes are stored as
separate profiles linked through ``parent_hash``.

Profiles are turned into sets of behavior-element tokens for similarity
analysis; tokenization is controlled by :class:`FeatureConfig`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from xml.etree import ElementTree
from xml.sax.saxutils import escape as _xml_escape
from xml.sax.saxutils import quoteattr as _xml_quoteattr

# A behavior element is an opaque canonical token; profiles reduce to
# frozensets of them.
BehaviorElement = str
ElementSet = frozenset

RESERVED_ATTRIBUTES = ("Return", "Time")

# Attribute keys whose values name files, registry keys, or command lines.
# Windows resolves these case-insensitively, so their values are lowercased
# before tokenization (when FeatureConfig.normalize_paths is on) to avoid
# splitting one resource into several elements. Other values (flags, data
# strings) are kept verbatim.
PATH_LIKE_KEYS = frozenset(
    {"hName", "lpFileName", "lpApplicationName", "lpCommandLine", "hKey"}
)

# Tags and attribute keys must be serializable back to XML; restrict to the
# ASCII subset of XML names.
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


class ProfileError(ValueError):
    """Base class for profile format violations."""


class ProfileParseError(ProfileError):
    """Input is not well-formed XML; carries the source line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class ProfileSchemaError(ProfileError):
    """Well-formed input (or field value) that violates the profile schema."""

    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field_name = field_name


@dataclass(frozen=True)
class ApiEvent:
    """One recorded API call: name, parameters, return value, timestamp."""

    api_name: str
    attributes: tuple[tuple[str, str], ...] = ()
    return_value: str | None = None
    timestamp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(tuple(pair) for pair in self.attributes))
        if not isinstance(self.api_name, str) or not _NAME_RE.match(self.api_name):
            raise ProfileSchemaError(
                f"api_name must be a non-empty XML name, got {self.api_name!r}",
                field_name="api_name",
            )
        seen = set()
        for pair in self.attributes:
            if len(pair) != 2 or not all(isinstance(part, str) for part in pair):
                raise ProfileSchemaError("attributes must be (key, value) text pairs")
            key = pair[0]
            if not _NAME_RE.match(key):
                raise ProfileSchemaError(f"attribute key {key!r} is not an XML name", field_name=key)
            if key in RESERVED_ATTRIBUTES:
                raise ProfileSchemaError(f"attribute key {key!r} is reserved", field_name=key)
            if key in seen:
                raise ProfileSchemaError(f"duplicate attribute key {key!r}", field_name=key)
            seen.add(key)
        if self.return_value is not None and not isinstance(self.return_value, str):
            raise ProfileSchemaError("Return must be text", field_name="Return")
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp < 0:
            raise ProfileSchemaError(
                f"Time must be a non-negative integer, got {self.timestamp!r}", field_name="Time"
            )


@dataclass(frozen=True)
class Profile:
    """One process's behavior profile."""

    hash: str
    process_id: int
    duration_seconds: int
    events: tuple[ApiEvent, ...] = ()
    parent_hash: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not isinstance(self.hash, str) or not self.hash:
            raise ProfileSchemaError("Hash must be non-empty text", field_name="Hash")
        if not isinstance(self.process_id, int) or isinstance(self.process_id, bool) or self.process_id <= 0:
            raise ProfileSchemaError(
                f"Process_id must be a positive integer, got {self.process_id!r}",
                field_name="Process_id",
            )
        if (
            not isinstance(self.duration_seconds, int)
            or isinstance(self.duration_seconds, bool)
            or self.duration_seconds <= 0
        ):
            raise ProfileSchemaError(
                f"Duration must be a positive integer, got {self.duration_seconds!r}",
                field_name="Duration",
            )
        if self.parent_hash is not None and (not isinstance(self.parent_hash, str) or not self.parent_hash):
            raise ProfileSchemaError("Parent_hash must be non-empty text when present", field_name="Parent_hash")
        previous = None
        for event in self.events:
            if not isinstance(event, ApiEvent):
                raise ProfileSchemaError("events must be ApiEvent instances")
            if previous is not None and event.timestamp < previous:
                raise ProfileSchemaError(
                    f"events out of order: Time {event.timestamp} follows Time {previous}",
                    field_name="Time",
                )
            previous = event.timestamp


@dataclass(frozen=True)
class FeatureConfig:
    """Controls how API events fold into behavior-element tokens.

    with_params=False keeps only API names. With parameters on, the token
    also encodes the attribute pairs (sorted by key) and, when
    include_return is set, the return value. ngram_n > 1 tokenizes windows
    of consecutive calls instead of single calls.
    """

    with_params: bool = True
    ngram_n: int = 1
    normalize_paths: bool = True
    include_return: bool = True

    def __post_init__(self):
        if not isinstance(self.ngram_n, int) or isinstance(self.ngram_n, bool) or self.ngram_n < 1:
            raise ValueError(f"ngram_n must be a positive integer, got {self.ngram_n!r}")


def _meta_text(meta: ElementTree.Element, tag: str) -> str:
    node = meta.find(tag)
    if node is None or node.text is None or not node.text.strip():
        raise ProfileSchemaError(f"missing or empty <{tag}> in <Meta>", field_name=tag)
    return node.text.strip()


def _meta_int(meta: ElementTree.Element, tag: str) -> int:
    text = _meta_text(meta, tag)
    try:
        return int(text)
    except ValueError:
        raise ProfileSchemaError(f"<{tag}> must be an integer, got {text!r}", field_name=tag) from None


def parse_profile(xml_text: str) -> Profile:
    """Parse one profile document.

    Raises ProfileParseError for malformed XML (with line/column) and
    ProfileSchemaError, naming the offending field, for documents that do
    not match the profile schema.
    """
    try:
        root = ElementTree.fromstring(xml_text)
    except ElementTree.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise ProfileParseError(f"malformed XML: {exc}", line=line, column=column) from exc
    if root.tag != "Profile":
        raise ProfileSchemaError(f"root element must be <Profile>, got <{root.tag}>", field_name="Profile")
    meta = root.find("Meta")
    if meta is None:
        raise ProfileSchemaError("missing <Meta> element", field_name="Meta")
    execution = root.find("Execution")
    if execution is None:
        raise ProfileSchemaError("missing <Execution> element", field_name="Execution")

    sample_hash = _meta_text(meta, "Hash")
    process_id = _meta_int(meta, "Process_id")
    duration = _meta_int(meta, "Duration")
    parent_node = meta.find("Parent_hash")
    parent_hash = parent_node.text.strip() if parent_node is not None and parent_node.text else None

    events = []
    for index, element in enumerate(execution):
        attributes = []
        return_value = None
        time_text = None
        for key, value in element.attrib.items():
            if key == "Return":
                return_value = value
            elif key == "Time":
                time_text = value
            else:
                attributes.append((key, value))
        if time_text is None:
            raise ProfileSchemaError(
                f"event {index} <{element.tag}>: missing Time attribute", field_name="Time"
            )
        try:
            timestamp = int(time_text)
        except ValueError:
            raise ProfileSchemaError(
                f"event {index} <{element.tag}>: Time must be an integer, got {time_text!r}",
                field_name="Time",
            ) from None
        events.append(ApiEvent(element.tag, tuple(attributes), return_value, timestamp))
    return Profile(sample_hash, process_id, duration, tuple(events), parent_hash)


def serialize_profile(profile: Profile) -> str:
    """Emit the profile XML document; parse_profile(serialize_profile(p)) == p."""
    lines = ['<?xml version="1.0"?>', "<Profile>", "<Meta>"]
    lines.append(f"<Hash>{_xml_escape(profile.hash)}</Hash>")
    lines.append(f"<Process_id>{profile.process_id}</Process_id>")
    lines.append(f"<Duration>{profile.duration_seconds}</Duration>")
    if profile.parent_hash is not None:
        lines.append(f"<Parent_hash>{_xml_escape(profile.parent_hash)}</Parent_hash>")
    lines.append("</Meta>")
    if profile.events:
        lines.append("<Execution>")
        for event in profile.events:
            parts = [event.api_name]
            for key, value in event.attributes:
                parts.append(f"{key}={_xml_quoteattr(value)}")
            if event.return_value is not None:
                parts.append(f"Return={_xml_quoteattr(event.return_value)}")
            parts.append(f'Time="{event.timestamp}"')
            lines.append(f"<{' '.join(parts)} />")
        lines.append("</Execution>")
    else:
        lines.append("<Execution/>")
    lines.append("</Profile>")
    return "\n".join(lines) + "\n"


def _escape_part(text: str) -> str:
    # Keep tokens unambiguous: '|' separates fields, '=' splits key/value.
    return text.replace("%", "%25").replace("|", "%7C").replace("=", "%3D")


def canonicalize_event(event: ApiEvent, config: FeatureConfig) -> BehaviorElement:
    """Deterministic token for one event; the timestamp never participates.

    Attribute order in the source never matters: pairs are sorted by key.
    """
    if not config.with_params:
        return event.api_name
    parts = [_escape_part(event.api_name)]
    for key, value in sorted(event.attributes):
        if config.normalize_paths and key in PATH_LIKE_KEYS:
            value = value.lower()
        parts.append(f"{_escape_part(key)}={_escape_part(value)}")
    if config.include_return and event.return_value is not None:
        parts.append(f"Return={_escape_part(event.return_value)}")
    return "|".join(parts)


def extract_elements(profile: Profile, config: FeatureConfig) -> ElementSet:
    """Element set of a profile: distinct tokens, or distinct n-gram tokens.

    With ngram_n=N>1 every window of N consecutive events becomes one
    token; a profile with fewer than N events yields the empty set.
    """
    tokens = [canonicalize_event(event, config) for event in profile.events]
    n = config.ngram_n
    if n == 1:
        return frozenset(tokens)
    if len(tokens) < n:
        return frozenset()
    return frozenset("||".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def read_corpus(directory: str | Path) -> list[tuple[str, Profile]]:
    """Load a corpus directory of <hash>-<ordinal>.xml files.

    Returns (label, profile) pairs ordered by filename; the label is the
    file stem. Parse errors are re-raised naming the offending file.
    """
    path = Path(directory)
    if not path.is_dir():
        raise ProfileError(f"corpus directory not found: {path}")
    items = []
    for xml_path in sorted(path.glob("*.xml")):
        try:
            items.append((xml_path.stem, parse_profile(xml_path.read_text(encoding="utf-8"))))
        except ProfileError as exc:
            raise type(exc)(f"{xml_path}: {exc}") from exc
    if not items:
        raise ProfileError(f"no profile XML files in {path}")
    return items
