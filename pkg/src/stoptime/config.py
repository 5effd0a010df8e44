"""Runtime caps on the enumeration-based engines.

``STOPTIME_ENUM_CAP`` overrides the antichain depth cap; the branch cap follows it one
level deeper, matching the defaults 3 and 4.
"""

import os

DEFAULT_ANTICHAIN_CAP = 3
DEFAULT_BRANCH_CAP = 4


def antichain_cap() -> int:
    raw = os.environ.get("STOPTIME_ENUM_CAP")
    return int(raw) if raw else DEFAULT_ANTICHAIN_CAP


def branch_cap() -> int:
    raw = os.environ.get("STOPTIME_ENUM_CAP")
    return int(raw) + 1 if raw else DEFAULT_BRANCH_CAP
