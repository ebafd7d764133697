"""Reference external evaluator: answers with the first configuration value.

Speaks the line-delimited protocol documented in docs/evaluator-protocol.md
and exists so the external-objective plumbing can be exercised without a
real training pipeline:

    python -m boinit.echo_eval
"""

from __future__ import annotations

import json
import sys


def main() -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        first_value = next(iter(request["config"].values()))
        response = {"index": request["index"], "value": first_value}
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
