"""Context-free grammars with per-rule probabilities.

Grammars are read from a small BNF dialect::

    # comment
    <start> ::= <expr>
    <expr>  ::= <expr> <op> <expr> | <pre_op> ( <expr> ) | <var>
    <var>   ::= 1.0 | x[n]

Alternatives may continue over several lines until the next ``::=``.  The
token ``x[n]`` is a macro: an alternative containing it is replicated once
per input feature (``x[0]``, ``x[1]``, ...).

Depth convention used throughout the package: the start symbol sits at
level 1 and every symbol (terminals included) adds a level, so
``<start> -> <expr> -> <var> -> x[0]`` has depth 4.
"""
from __future__ import annotations

import bisect
import itertools
import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

PROBABILITY_TOLERANCE = 1e-9
FEATURE_MACRO = "x[n]"


class GrammarError(ValueError):
    """Raised for malformed or inconsistent grammars."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Symbol:
    text: str
    terminal: bool

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise GrammarError(f"invalid symbol text {self.text!r}")

    def __str__(self):
        return self.text if self.terminal else f"<{self.text}>"


def T(text):
    return Symbol(text, True)


def NT(name):
    return Symbol(name, False)


@dataclass(frozen=True)
class Rule:
    body: tuple[Symbol, ...]
    probability: float = 1.0
    recursive: bool = False

    def __str__(self):
        return " ".join(str(s) for s in self.body)


@dataclass(frozen=True)
class GroupingSpec:
    """Which rules of which non-terminal move into which fresh non-terminal.

    ``groups`` holds ``(source, [(new_name, [rule indices]), ...])`` entries.
    """

    groups: tuple[tuple[str, tuple[tuple[str, tuple[int, ...]], ...]], ...] = ()


class Grammar:
    """An immutable, validated probabilistic context-free grammar.

    ``rules`` maps non-terminal names (declaration order matters) to their
    alternatives.  Recursion flags, consolidation heights and cumulative
    selection tables are derived on construction; whatever flags the input
    rules carry are ignored.
    """

    def __init__(
        self,
        rules: Mapping[str, Sequence[Rule]],
        start: str | None = None,
        check_probabilities: bool = True,
    ):
        if not rules:
            raise GrammarError("grammar has no non-terminals")
        self.names: tuple[str, ...] = tuple(rules)
        self.start = self.names[0] if start is None else start
        if self.start not in rules:
            raise GrammarError(f"start symbol <{self.start}> is not declared")
        for name, alts in rules.items():
            if not alts:
                raise GrammarError(f"<{name}> has no rules")
            for rule in alts:
                if not rule.body:
                    raise GrammarError(f"<{name}> has an empty rule")
                for sym in rule.body:
                    if not sym.terminal and sym.text not in rules:
                        raise GrammarError(
                            f"<{sym.text}> used in <{name}> is not declared"
                        )
                if not 0.0 <= rule.probability <= 1.0:
                    raise GrammarError(
                        f"probability {rule.probability} of <{name}> ::= {rule} "
                        "is outside [0, 1]"
                    )

        reach = _reachability(rules)
        self.rules: dict[str, tuple[Rule, ...]] = {}
        for name, alts in rules.items():
            self.rules[name] = tuple(
                replace(r, recursive=_is_recursive(name, r, reach)) for r in alts
            )
        if check_probabilities and not normalize_check(self):
            bad = [n for n in self.names if abs(sum(self.probabilities(n)) - 1) > PROBABILITY_TOLERANCE]
            raise GrammarError(f"probabilities do not sum to 1 for {bad}")

        self.height = _consolidation_heights(self.rules)
        self.recursion_budget: dict[str, int] = {}
        self._tables: dict[tuple[str, bool], tuple[list[int], list[float]]] = {}
        for name, alts in self.rules.items():
            rec = [r for r in alts if r.recursive]
            self.recursion_budget[name] = max(
                (self._symbol_height(s) for r in rec for s in r.body), default=0
            )
            for allow in (True, False):
                self._tables[name, allow] = _cumulative(alts, allow)

    # structure queries

    def __contains__(self, name):
        return name in self.rules

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return self.start == other.start and self.rules == other.rules

    def __repr__(self):
        return f"Grammar({len(self.names)} non-terminals, start=<{self.start}>)"

    def probabilities(self, name) -> tuple[float, ...]:
        return tuple(r.probability for r in self.rules[name])

    @property
    def n_rules(self) -> int:
        return sum(len(r) for r in self.rules.values())

    @property
    def min_depth(self) -> int:
        """Depth every derivation is guaranteed to fit into once consolidated."""
        return self.height[self.start]

    def _symbol_height(self, sym):
        return 1 if sym.terminal else self.height[sym.text]

    def allows_recursion(self, name, depth, max_depth) -> bool:
        """True if a node of ``name`` at ``depth`` may expand a recursive rule.

        A recursive rule is admitted only when every child it creates can still
        be consolidated within ``max_depth``.
        """
        return depth + self.recursion_budget[name] <= max_depth

    def candidates(self, name, allow_recursive) -> list[int]:
        return self._tables[name, allow_recursive][0]

    def with_probabilities(self, probs: Mapping[str, Sequence[float]]) -> "Grammar":
        """Return a copy where the listed non-terminals get new rule probabilities."""
        rules = {}
        for name, alts in self.rules.items():
            if name in probs:
                p = probs[name]
                if len(p) != len(alts):
                    raise GrammarError(
                        f"<{name}> has {len(alts)} rules, got {len(p)} probabilities"
                    )
                alts = tuple(replace(r, probability=float(q)) for r, q in zip(alts, p))
            rules[name] = alts
        return Grammar(rules, self.start)

    def uniform(self) -> "Grammar":
        return self.with_probabilities(
            {n: [1.0 / len(a)] * len(a) for n, a in self.rules.items()}
        )


def _reachability(rules):
    children = {
        n: {s.text for r in alts for s in r.body if not s.terminal}
        for n, alts in rules.items()
    }
    reach = {}
    for n in rules:
        seen, stack = set(), list(children[n])
        while stack:
            c = stack.pop()
            if c not in seen:
                seen.add(c)
                stack.extend(children[c])
        reach[n] = seen
    return reach


def _is_recursive(head, rule, reach):
    return any(
        not s.terminal and (s.text == head or head in reach[s.text]) for s in rule.body
    )


def _consolidation_rules(alts):
    nonrec = [r for r in alts if not r.recursive]
    return nonrec or list(alts)


def _consolidation_heights(rules):
    # Heights of the deepest tree reachable when only consolidation rules are
    # used.  A cycle here means some derivation can never be forced to end.
    height, state = {}, {}

    def visit(name, path):
        if state.get(name) == "done":
            return height[name]
        if state.get(name) == "active":
            cycle = " -> ".join(f"<{n}>" for n in path[path.index(name):] + [name])
            raise GrammarError(
                f"derivations of <{name}> cannot terminate under the depth limit "
                f"(no non-recursive way out of {cycle})"
            )
        state[name] = "active"
        best = 0
        for rule in _consolidation_rules(rules[name]):
            for s in rule.body:
                best = max(best, 1 if s.terminal else visit(s.text, path + [name]))
        state[name] = "done"
        height[name] = best + 1
        return height[name]

    for name in rules:
        visit(name, [])
    return height


def _cumulative(alts, allow_recursive):
    if allow_recursive:
        idx = list(range(len(alts)))
    else:
        idx = [i for i, r in enumerate(alts) if not r.recursive] or list(range(len(alts)))
    probs = [alts[i].probability for i in idx]
    total = sum(probs)
    if total <= 0.0:
        # every candidate lost its mass; fall back to uniform over candidates
        probs, total = [1.0] * len(idx), float(len(idx))
    cum = list(itertools.accumulate(p / total for p in probs))
    return idx, cum


def rule_for_codon(grammar: Grammar, name: str, codon: float, allow_recursive: bool) -> int:
    """Map a codon in [0, 1) to a rule index of ``name``.

    The candidate rules partition [0, 1) into half-open intervals sized by
    their (renormalized) probabilities; the interval containing ``codon`` wins.
    """
    try:
        idx, cum = grammar._tables[name, bool(allow_recursive)]
    except KeyError:
        raise GrammarError(f"unknown non-terminal <{name}>") from None
    j = bisect.bisect_right(cum, codon)
    return idx[min(j, len(idx) - 1)]


def normalize_check(grammar: Grammar) -> bool:
    return all(
        abs(sum(grammar.probabilities(n)) - 1.0) <= PROBABILITY_TOLERANCE
        for n in grammar.names
    )


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<def>::=)|(?P<or>\|)|(?P<nt><[^<>\s|]+>)|(?P<t>[^\s<>|]+)|(?P<bad>.)"
)


def _tokens(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith("#"):
            continue
        for m in _TOKEN.finditer(line):
            kind = m.lastgroup
            if kind == "ws":
                continue
            col = m.start() + 1
            if kind == "bad":
                raise GrammarError(f"unexpected character {m.group()!r}", lineno, col)
            yield kind, m.group(), lineno, col


def parse_bnf(text: str, n_features: int = 1) -> Grammar:
    """Parse grammar text into a validated grammar with uniform probabilities."""
    toks = list(_tokens(text))
    decls: list[tuple[str, list[list[Symbol]], int, int]] = []
    i = 0
    while i < len(toks):
        kind, value, line, col = toks[i]
        if kind == "nt" and i + 1 < len(toks) and toks[i + 1][0] == "def":
            decls.append((value[1:-1], [[]], line, col))
            i += 2
            continue
        if kind == "def":
            raise GrammarError("'::=' must follow a non-terminal", line, col)
        if not decls:
            raise GrammarError(f"{value!r} appears before any declaration", line, col)
        alts = decls[-1][1]
        if kind == "or":
            if not alts[-1]:
                raise GrammarError("empty alternative", line, col)
            alts.append([])
        else:
            alts[-1].append(NT(value[1:-1]) if kind == "nt" else T(value))
        i += 1
    if not decls:
        raise GrammarError("no declarations found")

    rules: dict[str, list[Rule]] = {}
    for name, alts, line, col in decls:
        if name in rules:
            raise GrammarError(f"<{name}> declared more than once", line, col)
        if not alts[-1]:
            raise GrammarError(f"<{name}> ends with an empty alternative", line, col)
        bodies = []
        for alt in alts:
            bodies.extend(_expand_features(alt, n_features))
        rules[name] = [Rule(tuple(b), 1.0 / len(bodies)) for b in bodies]
    return Grammar(rules)


def _expand_features(alt, n_features):
    if not any(s.terminal and s.text == FEATURE_MACRO for s in alt):
        return [alt]
    return [
        [T(f"x[{k}]") if s.terminal and s.text == FEATURE_MACRO else s for s in alt]
        for k in range(n_features)
    ]


def render(grammar: Grammar) -> str:
    """Serialize ``grammar`` in the format read by :func:`parse_bnf`."""
    width = max(len(n) for n in grammar.names) + 2
    lines = [
        f"{'<' + name + '>':<{width}} ::= " + " | ".join(str(r) for r in grammar.rules[name])
        for name in grammar.names
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- grouping

_SPLIT = re.compile(r"^split\s+<?([^\s<>]+)>?\s*->\s*<?([^\s<>:]+)>?\s*:\s*(.*)$")


def parse_grouping(text: str) -> GroupingSpec:
    entries: dict[str, list[tuple[str, tuple[int, ...]]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SPLIT.match(line)
        if not m:
            raise GrammarError("expected 'split <source> -> <new>: i,j,...'", lineno, 1)
        try:
            idx = tuple(int(t) for t in m.group(3).replace(",", " ").split())
        except ValueError:
            raise GrammarError("rule indices must be integers", lineno, m.start(3) + 1) from None
        entries.setdefault(m.group(1), []).append((m.group(2), idx))
    return GroupingSpec(tuple((src, tuple(g)) for src, g in entries.items()))


def apply_function_grouping(grammar: Grammar, spec: GroupingSpec) -> Grammar:
    """Move groups of rules into fresh non-terminals.

    Each source non-terminal keeps its ungrouped rules, followed by one rule
    per group that refers to the group's new non-terminal.  New non-terminals
    are declared right after their source.  Probabilities are reset to
    uniform.
    """
    plan = dict(spec.groups)
    if len(plan) != len(spec.groups):
        raise GrammarError("a source non-terminal is listed twice")
    new_names: set[str] = set()
    for src, groups in plan.items():
        if src not in grammar:
            raise GrammarError(f"unknown source non-terminal <{src}>")
        used: set[int] = set()
        for new, idx in groups:
            if new in grammar or new in new_names:
                raise GrammarError(f"new non-terminal <{new}> collides with an existing name")
            new_names.add(new)
            if not idx:
                raise GrammarError(f"group <{new}> is empty")
            for i in idx:
                if not 0 <= i < len(grammar.rules[src]):
                    raise GrammarError(f"rule index {i} out of range for <{src}>")
                if i in used:
                    raise GrammarError(f"rule {i} of <{src}> appears in two groups")
                used.add(i)

    bodies: dict[str, list[tuple[Symbol, ...]]] = {}
    for name in grammar.names:
        alts = [r.body for r in grammar.rules[name]]
        if name not in plan:
            bodies[name] = alts
            continue
        moved = {i for _, idx in plan[name] for i in idx}
        bodies[name] = [b for i, b in enumerate(alts) if i not in moved]
        bodies[name] += [(NT(new),) for new, _ in plan[name]]
        for new, idx in plan[name]:
            bodies[new] = [alts[i] for i in idx]
    rules = {n: [Rule(b, 1.0 / len(bs)) for b in bs] for n, bs in bodies.items()}
    return Grammar(rules, grammar.start)


# ---------------------------------------------------------------- enumeration

def enumerate_language(grammar: Grammar, max_depth: int) -> set[str]:
    """All phenotypes derivable under the depth limit ``max_depth``.

    Uses exactly the rule-candidate sets of the genotype mapping, so the
    result is the set of strings the mapping can ever produce at that limit.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    memo: dict[tuple[str, int], frozenset[str]] = {}

    def lang(name, depth):
        key = (name, depth)
        if key not in memo:
            allow = grammar.allows_recursion(name, depth, max_depth)
            out = set()
            for j in grammar.candidates(name, allow):
                parts = [
                    (s.text,) if s.terminal else lang(s.text, depth + 1)
                    for s in grammar.rules[name][j].body
                ]
                out.update(" ".join(p) for p in itertools.product(*parts))
            memo[key] = frozenset(out)
        return memo[key]

    return set(lang(grammar.start, 1))


def recursion_report(grammar: Grammar) -> Iterable[str]:
    for name in grammar.names:
        yield f"<{name}>  height={grammar.height[name]}  recursion_budget={grammar.recursion_budget[name]}"
        for i, r in enumerate(grammar.rules[name]):
            flag = "recursive" if r.recursive else "non-recursive"
            yield f"  {i}: {r}  p={r.probability:.6g}  {flag}"
