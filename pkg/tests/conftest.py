from __future__ import annotations

import random

import pytest

from malbehave import ApiEvent, Profile

# Real-world style sample: an installer-bundle process dropping a file,
# touching the registry, and spawning a child process.
SAMPLE_PROFILE_XML = """<?xml version="1.0"?>
<Profile>
<Meta>
<Hash>61fd4cac9f5429d14d015e7632e3514a</Hash>
<Process_id>1524</Process_id>
<Duration>300</Duration>
</Meta>
<Execution>
<CreateFile hName="C:\\DOCUME~1\\ants\\LOCALS~1\\Temp\\n7785\\s7785.exe" desiredAccess="GENERIC_WRITE" creationDisposition="CREATE_ALWAYS" Return="SUCCESS" Time="317560000" />
<LoadLibrary lpFileName="SHELL32.dll" Return="SUCCESS" Time="339720000" />
<RegQueryValue hKey="HKCU\\Software\\Microsoft\\Windows\\ShellNoRoam\\MUICache\\C:\\DOCUME~1\\ants\\LOCALS~1\\Temp\\n7785\\s7785.exe" Return="FAILURE" Time="341100000" />
<RegSetValue hKey="HKCU\\Software\\Microsoft\\Windows\\ShellNoRoam\\MUICache\\C:\\DOCUME~1\\ants\\LOCALS~1\\Temp\\n7785\\s7785.exe" type="REG_SZ" data="install manager" Return="SUCCESS" Time="341350000" />
<CreateProcessInternal lpApplicationName="C:\\DOCUME~1\\ants\\LOCALS~1\\Temp\\n7785\\s7785.exe" lpCommandLine="C:\\DOCUME~1\\ants\\LOCALS~1\\Temp\\n7785\\s7785.exe ins.exe /e11831362 /u50d1d9d5-cf90-407c-820a-35e05bc06f2f /v" Return="SUCCESS" dwProcessId="1276" dwThreadId="1272" Time="341600000" />
</Execution>
</Profile>
"""

_API_POOL = ("CreateFile", "ReadFile", "RegSetValue", "LoadLibrary", "WinExec", "OpenProcess")
_KEY_POOL = ("hName", "lpFileName", "hKey", "data", "flags", "mode")
_VALUE_POOL = (
    "C:\\Windows\\temp\\a.exe",
    "x & y < z",
    'quoted "value"',
    "it's",
    "line\nbreak",
    "tab\tstop",
    "plain",
    "",
)


def make_random_event(rng: random.Random, timestamp: int) -> ApiEvent:
    keys = rng.sample(_KEY_POOL, rng.randint(0, 4))
    attributes = tuple((key, rng.choice(_VALUE_POOL)) for key in keys)
    return_value = rng.choice(("SUCCESS", "FAILURE", None))
    return ApiEvent(rng.choice(_API_POOL), attributes, return_value, timestamp)


def make_random_profile(rng: random.Random) -> Profile:
    ticks = rng.randint(0, 10_000)
    events = []
    for _ in range(rng.randint(0, 12)):
        ticks += rng.randint(0, 5_000)
        events.append(make_random_event(rng, ticks))
    return Profile(
        hash="%032x" % rng.getrandbits(128),
        process_id=rng.randint(1, 9999),
        duration_seconds=300,
        events=tuple(events),
        parent_hash="%032x" % rng.getrandbits(128) if rng.random() < 0.3 else None,
    )


@pytest.fixture
def sample_xml() -> str:
    return SAMPLE_PROFILE_XML
