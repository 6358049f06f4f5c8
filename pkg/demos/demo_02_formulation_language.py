"""The formulation language from the outside in.

A model adapter answers formulation prompts with a fenced `ecdsl` block.
This script extracts one from a fake reply, parses it, compiles it into an
optimization instance, solves it, and then shows how the two failure
categories look: syntactic (caught by the parser, with a span) and
semantic (caught by the compiler).

Run from the repository root:  python demos/demo_02_formulation_language.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from energy_concierge.dsl import DslError, compile_doc, extract_block, parse, print_doc
from energy_concierge.solver import solve_instance

reply = """Sure! Here is a formulation for your battery question:

```ecdsl
problem "battery_sizing"
var bsize >= 0
minimize 10 * sq(bsize) + 182.5 * max0(20 - 0.95 * bsize)
```

Let me know if you want me to tweak anything.
"""

text = extract_block(reply)
doc = parse(text)
instance = compile_doc(doc)
solution = solve_instance(instance)
print("canonical form:")
print(print_doc(doc))
print(f"optimal battery size: {solution.value('bsize'):.5f} kWh")
print()

# Syntactic failure: a misspelled keyword. The parser reports the first
# violation with its line and column, and nothing else.
try:
    parse('problem "oops"\nminimise bsize')
except DslError as err:
    print(f"syntactic: {err.code} at {err.span[0]}:{err.span[1]} - {err.message}")

# Semantic failure: the document parses but references an undeclared name.
try:
    compile_doc(parse('problem "oops"\nvar b >= 0\nminimize b + q[3]'))
except DslError as err:
    print(f"semantic:  {err.code} at {err.span[0]}:{err.span[1]} - {err.message}")
