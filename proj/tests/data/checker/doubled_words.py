"""Toy line-protocol grammar checker used by the tests.

Reads one sentence per line on stdin and answers one JSON array per line,
flagging immediately repeated words ("the the"). Offsets count code points.
"""

import json
import re
import sys

DOUBLED = re.compile(r"\b(\w+) (\1)\b", re.IGNORECASE)

for line in sys.stdin:
    text = line.rstrip("\n")
    issues = [
        {
            "offset": m.start(),
            "length": m.end() - m.start(),
            "message": "Possible typo: you repeated a word",
            "replacements": [m.group(1)],
        }
        for m in DOUBLED.finditer(text)
    ]
    sys.stdout.write(json.dumps(issues) + "\n")
