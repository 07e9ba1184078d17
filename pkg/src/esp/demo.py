"""Deterministic demo fixture: a small annotated C application plus a
knowledge base with a parameterizable number of protection instances.

The application has 18 functions across two translation units, two
annotated code-region assets and two annotated data assets (around 450
source lines); the KB ships an illustrative rule set and protection
catalog. Everything is generated from fixed templates, so repeated runs
are byte-identical.
"""

from __future__ import annotations

import os

from .model import (
    AttackerModel,
    AttackStepRule,
    HidingParams,
    KnowledgeBase,
    MetricBand,
    OverheadVector,
    PrecedenceRules,
    Protection,
    ProtectionInstance,
    Synergy,
    Thresholds,
    parse_term,
)


def _filler(var: str, count: int, indent: str = "    ") -> str:
    lines = []
    for i in range(count):
        if i % 5 == 2:
            lines.append(f"{indent}if ({var} & {1 << (i % 7)}) {{ {var} ^= 0x{(i * 37) % 251:02x}; }}")
        elif i % 5 == 4:
            lines.append(f"{indent}{var} = ({var} << 1) | ({var} >> 31);")
        else:
            lines.append(f"{indent}{var} = {var} * {2 * i + 3} + {i * i + 1};")
    return "\n".join(lines)


def demo_sources() -> dict[str, str]:
    """Relative path -> file content for the demo application."""
    util_c = f"""/* util.c: support routines for the demo player */
#include "demo.h"

int u_rot(int v, int n) {{
    int r = v;
    while (n > 0) {{
        r = (r << 1) | ((r >> 31) & 1);
        n = n - 1;
    }}
{_filler("r", 16)}
    return r;
}}

int u_mix(int a, int b) {{
    int m = a ^ (b << 3);
    if (a > b && b != 0) {{
        m = m + a / b;
    }}
{_filler("m", 20)}
    return m;
}}

int u_add(int a, int b) {{
    int s = a + b;
    if (s < 0) {{
        s = -s;
    }}
{_filler("s", 12)}
    return s;
}}

int u_chk(const int *buf, int len) {{
    int acc = 0;
    int i;
    for (i = 0; i < len; i++) {{
        acc = u_add(acc, buf[i]);
        if ((acc & 0xff) == 0x5a) {{
            acc = u_rot(acc, 3);
        }}
    }}
{_filler("acc", 18)}
    return acc;
}}

void u_log(int code) {{
    int level = code & 7;
    if (level > 4) {{
        level = 4;
    }}
{_filler("level", 10)}
}}

int u_parse(const char *text) {{
    int value = 0;
    int i = 0;
    while (text[i] != 0) {{
        if (text[i] >= '0' && text[i] <= '9') {{
            value = value * 10 + (text[i] - '0');
        }}
        i = i + 1;
    }}
{_filler("value", 16)}
    return value;
}}

void u_err(int code) {{
    u_log(code);
    if (code < 0) {{
        u_log(-code);
    }}
{_filler("code", 8)}
}}

int u_state(int next) {{
    static int state = 0;
    if (next >= 0) {{
        state = next;
    }}
{_filler("state", 14)}
    return state;
}}

int u_poll(int timeout) {{
    int ticks = 0;
    for (ticks = 0; ticks < timeout; ticks++) {{
        if ((ticks % 16) == 15) {{
            u_state(ticks);
        }}
    }}
{_filler("ticks", 12)}
    return ticks;
}}

int u_enc(int byte) {{
    int e = byte & 0xff;
    e = u_rot(e, 2) ^ 0x3c;
{_filler("e", 16)}
    return e;
}}
"""

    core_c = f"""/* core.c: demo player entry points and protected kernels */
#include "demo.h"

#pragma esp var(master_key, confidentiality, weight=3.0)
static int master_key = 0x1337c0de;

#pragma esp var(license_ok, integrity, weight=2.0)
static int license_ok = 0;

int init_app(int seed) {{
    int cfg = u_state(seed);
    if (cfg == 0) {{
        cfg = seed ^ 0x7f;
    }}
{_filler("cfg", 14)}
    return cfg;
}}

int read_input(int *buf, int len) {{
    int got = u_poll(len);
    int i;
    for (i = 0; i < got && i < len; i++) {{
        buf[i] = u_enc(i) ^ master_key;
    }}
{_filler("got", 12)}
    return got;
}}

int crypt_block(int *buf, int len) {{
    int acc = master_key;
    int i;
#pragma esp asset begin(confidentiality, weight=2.5, id=crypt_kernel)
    for (i = 0; i < len; i++) {{
        acc = u_mix(acc, buf[i]);
        buf[i] = u_rot(buf[i] ^ acc, (i % 5) + 1);
        if ((i & 3) == 3) {{
            acc = u_add(acc, master_key >> 4);
        }}
    }}
{_filler("acc", 20)}
#pragma esp asset end
    u_log(len);
    return acc;
}}

int verify_license(const char *blob) {{
    int token = u_parse(blob);
    int valid = 0;
#pragma esp asset begin(integrity, confidentiality, weight=2.0, id=license_gate)
    if (token != 0) {{
        int digest = u_chk(&token, 1);
        if (digest == (master_key & 0xffff)) {{
            valid = 1;
        }}
    }}
    license_ok = valid;
{_filler("valid", 16)}
#pragma esp asset end
    if (!valid) {{
        u_err(-2);
    }}
    return valid;
}}

int write_output(const int *buf, int len) {{
    int written = 0;
    int i;
    for (i = 0; i < len; i++) {{
        u_log(buf[i] & 0xff);
        written = written + 1;
    }}
{_filler("written", 12)}
    return written;
}}

int encode_byte(int b) {{
    int buf[1];
    buf[0] = b;
    crypt_block(buf, 1);
{_filler("b", 10)}
    return buf[0];
}}

int decode_byte(int b) {{
    int d = u_enc(b);
{_filler("d", 10)}
    return d;
}}

void shutdown_app(void) {{
    u_state(0);
    u_log(0);
{_filler("master_key", 8)}
}}

int main(int argc, char **argv) {{
    int buf[64];
    int n;
    init_app(argc);
    if (argc > 1 && !verify_license(argv[1])) {{
        u_err(-1);
        return 1;
    }}
    n = read_input(buf, 64);
    crypt_block(buf, n);
    write_output(buf, n);
{_filler("n", 10)}
    shutdown_app();
    return 0;
}}
"""

    demo_h = """/* demo.h */
#ifndef DEMO_H
#define DEMO_H

int u_rot(int v, int n);
int u_mix(int a, int b);
int u_add(int a, int b);
int u_chk(const int *buf, int len);
void u_log(int code);
int u_parse(const char *text);
void u_err(int code);
int u_state(int next);
int u_poll(int timeout);
int u_enc(int byte);

int init_app(int seed);
int read_input(int *buf, int len);
int crypt_block(int *buf, int len);
int verify_license(const char *blob);
int write_output(const int *buf, int len);
int encode_byte(int b);
int decode_byte(int b);
void shutdown_app(void);

#endif
"""
    return {"util.c": util_c, "core.c": core_c, "demo.h": demo_h}


def write_demo_sources(dst: str) -> None:
    os.makedirs(dst, exist_ok=True)
    for rel, content in demo_sources().items():
        with open(os.path.join(dst, rel), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)


# ---------------------------------------------------------------------------
# Knowledge base


def _rule(rid: str, head: str, premises: list[str], tags: list[str] | None = None, attrs=None, bands=None):
    return AttackStepRule(
        id=rid,
        head=parse_term(head),
        premises=tuple(parse_term(p) for p in premises),
        tags=tuple(tags or ()),
        attributes=attrs,
        metric_modifiers=tuple(bands or ()),
    )


def demo_rules() -> tuple[dict[str, int], list[AttackStepRule]]:
    from .model import AttributeVector as AV

    predicates = {
        "breach_confidentiality": 1,
        "breach_integrity": 1,
        "comprehend": 1,
        "extract_data": 1,
        "patch_code": 1,
        "tamper_data": 1,
        "locate": 1,
        "locate_static": 1,
        "locate_dynamic": 1,
        "disassemble": 1,
        "trace_exec": 1,
        "hook_debugger": 0,
        "run_app": 0,
    }
    rules = [
        _rule("goal_conf_re", "breach_confidentiality(A)", ["comprehend(A)"]),
        _rule("goal_conf_leak", "breach_confidentiality(A)", ["extract_data(A)"]),
        _rule("goal_integ_patch", "breach_integrity(A)", ["patch_code(A)"]),
        _rule("goal_integ_data", "breach_integrity(A)", ["tamper_data(A)"]),
        _rule("locate_any_s", "locate(A)", ["locate_static(A)"]),
        _rule("locate_any_d", "locate(A)", ["locate_dynamic(A)"]),
        _rule(
            "locate_static",
            "locate_static(A)",
            [],
            tags=["static_analysis"],
            attrs=AV(3, 2, 4, 4),
        ),
        _rule(
            "locate_dynamic",
            "locate_dynamic(A)",
            ["run_app"],
            tags=["dynamic_analysis"],
            attrs=AV(2, 2, 4, 3),
        ),
        _rule("run_app", "run_app", [], attrs=AV(1, 1, 5, 5)),
        _rule(
            "hook_debugger",
            "hook_debugger",
            [],
            tags=["dynamic_analysis"],
            attrs=AV(2, 2, 5, 4),
        ),
        _rule(
            "disassemble",
            "disassemble(A)",
            ["locate(A)"],
            tags=["static_analysis"],
            attrs=AV(3, 2, 5, 4),
        ),
        _rule(
            "trace_exec",
            "trace_exec(A)",
            ["locate(A)", "hook_debugger"],
            tags=["dynamic_analysis"],
            attrs=AV(3, 3, 4, 3),
        ),
        _rule(
            "comprehend",
            "comprehend(A)",
            ["disassemble(A)"],
            tags=["reverse_engineering"],
            attrs=AV(4, 3, 3, 3),
        ),
        _rule(
            "extract_data",
            "extract_data(A)",
            ["trace_exec(A)"],
            tags=["data_leak"],
            attrs=AV(3, 3, 3, 3),
        ),
        _rule(
            "patch_code",
            "patch_code(A)",
            ["disassemble(A)"],
            tags=["tampering"],
            attrs=AV(3, 3, 4, 4),
        ),
        _rule(
            "tamper_data",
            "tamper_data(A)",
            ["trace_exec(A)"],
            tags=["data_tampering"],
            attrs=AV(3, 4, 3, 3),
        ),
    ]
    return predicates, rules


_PROTECTIONS = [
    Protection("cff", frozenset({"confidentiality"}), singleton=False, resilience=0.5, fingerprint=0.8),
    Protection("guards", frozenset({"integrity"}), singleton=False, resilience=0.7, fingerprint=0.7),
    Protection("mask", frozenset({"confidentiality"}), singleton=False, resilience=0.45, fingerprint=0.4),
    Protection("antidebug", frozenset({"confidentiality", "integrity"}), singleton=True, resilience=0.6, fingerprint=0.5),
    Protection("opaque", frozenset({"confidentiality"}), singleton=False, resilience=0.4, fingerprint=0.6),
    Protection("encode", frozenset({"confidentiality", "integrity"}), singleton=False, resilience=0.55, fingerprint=0.5),
    Protection("virt", frozenset({"confidentiality", "integrity"}), singleton=True, resilience=0.8, fingerprint=0.9),
    Protection("mobility", frozenset({"confidentiality", "integrity"}), singleton=True, resilience=0.75, fingerprint=0.85),
]


def _pi(
    pid: str,
    protection: str,
    config: str,
    deltas: dict,
    scale: dict,
    offset: dict,
    coeffs: dict,
) -> ProtectionInstance:
    return ProtectionInstance(
        id=pid,
        protection=protection,
        config=config,
        attribute_deltas=deltas,
        metric_scale=scale,
        metric_offset=offset,
        overhead_coeffs=coeffs,
    )


def _demo_pi_catalog() -> list[ProtectionInstance]:
    # ordered so that a prefix of any length keeps a usable mix of
    # confidentiality, integrity and data-capable instances
    catalog = [
        _pi(
            "cff_low", "cff", "low",
            {"static_analysis": {"complexity": 1}, "reverse_engineering": {"complexity": 1, "tool_usability": -1}},
            {"cyclomatic": {"cyclomatic": 2.0}}, {"sloc": 8.0},
            {"client_time": {"sloc": 0.06, "cyclomatic": 0.2}, "client_memory": {"sloc": 0.08}},
        ),
        _pi(
            "guards_std", "guards", "std",
            {"tampering": {"complexity": 2, "tool_availability": -1}, "data_tampering": {"complexity": 1}},
            {}, {"sloc": 14.0, "cyclomatic": 2.0},
            {"client_time": {"sloc": 0.10}, "client_memory": {"sloc": 0.12}},
        ),
        _pi(
            "mask_std", "mask", "std",
            {"data_leak": {"complexity": 2, "tool_availability": -1}, "data_tampering": {"complexity": 1}},
            {}, {"sloc": 4.0, "operand_count": 6.0},
            {"client_time": {"sloc": 1.6}, "client_memory": {"sloc": 2.2}},
        ),
        _pi(
            "antidebug_std", "antidebug", "std",
            {"dynamic_analysis": {"complexity": 2, "tool_availability": -2}},
            {}, {"sloc": 10.0},
            {"client_time": {"sloc": 0.08}, "server_time": {"sloc": 0.02}},
        ),
        _pi(
            "opaque_low", "opaque", "low",
            {"static_analysis": {"complexity": 1}, "tampering": {"complexity": 1}},
            {"cyclomatic": {"cyclomatic": 1.5}}, {"sloc": 6.0},
            {"client_time": {"sloc": 0.05, "cyclomatic": 0.15}, "client_memory": {"sloc": 0.05}},
        ),
        _pi(
            "encode_std", "encode", "std",
            {"data_leak": {"complexity": 1, "required_skill": 1}, "data_tampering": {"complexity": 2}},
            {}, {"sloc": 6.0, "operand_count": 10.0},
            {"client_time": {"sloc": 1.9}, "client_memory": {"sloc": 1.4}},
        ),
        _pi(
            "virt_std", "virt", "std",
            {
                "static_analysis": {"complexity": 2, "tool_availability": -2},
                "reverse_engineering": {"complexity": 2},
                "dynamic_analysis": {"complexity": 1},
            },
            {"sloc": {"sloc": 1.8}, "halstead_volume": {"halstead_volume": 2.0}}, {"sloc": 40.0},
            {"client_time": {"sloc": 0.22}, "client_memory": {"sloc": 0.30}},
        ),
        _pi(
            "cff_high", "cff", "high",
            {"static_analysis": {"complexity": 2, "tool_usability": -1}, "reverse_engineering": {"complexity": 2}},
            {"cyclomatic": {"cyclomatic": 3.0}}, {"sloc": 16.0},
            {"client_time": {"sloc": 0.12, "cyclomatic": 0.35}, "client_memory": {"sloc": 0.14}},
        ),
        _pi(
            "mobility_std", "mobility", "std",
            {"static_analysis": {"complexity": 2, "tool_availability": -1}, "data_leak": {"complexity": 1}},
            {}, {"sloc": 12.0},
            {"client_time": {"sloc": 0.05}, "network_traffic": {"sloc": 0.18}, "server_time": {"sloc": 0.06}},
        ),
        _pi(
            "opaque_high", "opaque", "high",
            {"static_analysis": {"complexity": 2}, "tampering": {"complexity": 1, "tool_usability": -1}},
            {"cyclomatic": {"cyclomatic": 2.2}}, {"sloc": 12.0},
            {"client_time": {"sloc": 0.1, "cyclomatic": 0.3}, "client_memory": {"sloc": 0.1}},
        ),
        _pi(
            "guards_net", "guards", "networked",
            {"tampering": {"complexity": 2, "required_skill": 1}, "data_tampering": {"complexity": 2}},
            {}, {"sloc": 18.0, "cyclomatic": 3.0},
            {"client_time": {"sloc": 0.12}, "network_traffic": {"sloc": 0.1}, "server_memory": {"sloc": 0.08}},
        ),
        _pi(
            "mask_deep", "mask", "deep",
            {"data_leak": {"complexity": 3, "tool_availability": -1}, "dynamic_analysis": {"complexity": 1}},
            {}, {"sloc": 8.0, "operand_count": 14.0},
            {"client_time": {"sloc": 2.6}, "client_memory": {"sloc": 3.0}},
        ),
        _pi(
            "cff_mid", "cff", "mid",
            {"static_analysis": {"complexity": 2}, "reverse_engineering": {"complexity": 1}},
            {"cyclomatic": {"cyclomatic": 2.5}}, {"sloc": 12.0},
            {"client_time": {"sloc": 0.09, "cyclomatic": 0.28}, "client_memory": {"sloc": 0.11}},
        ),
        _pi(
            "opaque_mid", "opaque", "mid",
            {"static_analysis": {"complexity": 1, "tool_usability": -1}, "tampering": {"complexity": 1}},
            {"cyclomatic": {"cyclomatic": 1.8}}, {"sloc": 9.0},
            {"client_time": {"sloc": 0.07, "cyclomatic": 0.2}, "client_memory": {"sloc": 0.07}},
        ),
        _pi(
            "encode_wide", "encode", "wide",
            {"data_leak": {"complexity": 2}, "data_tampering": {"complexity": 2, "tool_availability": -1}},
            {}, {"sloc": 9.0, "operand_count": 16.0},
            {"client_time": {"sloc": 2.3}, "client_memory": {"sloc": 1.8}},
        ),
        _pi(
            "antidebug_hard", "antidebug", "hardened",
            {"dynamic_analysis": {"complexity": 3, "tool_availability": -2}},
            {}, {"sloc": 16.0},
            {"client_time": {"sloc": 0.14}, "server_time": {"sloc": 0.04}},
        ),
        _pi(
            "virt_lite", "virt", "lite",
            {"static_analysis": {"complexity": 2, "tool_availability": -1}, "reverse_engineering": {"complexity": 1}},
            {"sloc": {"sloc": 1.4}}, {"sloc": 24.0},
            {"client_time": {"sloc": 0.16}, "client_memory": {"sloc": 0.2}},
        ),
        _pi(
            "mobility_lite", "mobility", "lite",
            {"static_analysis": {"complexity": 1}, "data_leak": {"complexity": 1}},
            {}, {"sloc": 8.0},
            {"client_time": {"sloc": 0.04}, "network_traffic": {"sloc": 0.12}, "server_time": {"sloc": 0.04}},
        ),
        _pi(
            "guards_lite", "guards", "lite",
            {"tampering": {"complexity": 1}},
            {}, {"sloc": 8.0, "cyclomatic": 1.0},
            {"client_time": {"sloc": 0.06}, "client_memory": {"sloc": 0.07}},
        ),
        _pi(
            "cff_turbo", "cff", "turbo",
            {"static_analysis": {"complexity": 3, "tool_usability": -1}, "reverse_engineering": {"complexity": 2}},
            {"cyclomatic": {"cyclomatic": 3.5}}, {"sloc": 22.0},
            {"client_time": {"sloc": 0.16, "cyclomatic": 0.4}, "client_memory": {"sloc": 0.18}},
        ),
    ]
    return catalog


def demo_kb(n_pis: int = 8) -> KnowledgeBase:
    """Demo knowledge base with the first ``n_pis`` catalog instances."""
    catalog = _demo_pi_catalog()
    if not (1 <= n_pis <= len(catalog)):
        raise ValueError(f"n_pis must be in 1..{len(catalog)}")
    instances = catalog[:n_pis]
    used_protections = {pi.protection for pi in instances}
    predicates, rules = demo_rules()

    precedence = PrecedenceRules(
        forbidden=(("virt_std", "cff_low"),) if {"virt_std", "cff_low"} <= {p.id for p in instances} else (),
        discouraged=(("cff_low", "opaque_low", 0.9),)
        if {"cff_low", "opaque_low"} <= {p.id for p in instances}
        else (),
        synergies=(Synergy(pair=("antidebug_std", "guards_std"), delta={"complexity": 1}),)
        if {"antidebug_std", "guards_std"} <= {p.id for p in instances}
        else (),
        correlation_sets=(("license_ok", "master_key"),),
    )
    return KnowledgeBase(
        predicates=predicates,
        rules=rules,
        protections=[p for p in _PROTECTIONS if p.id in used_protections],
        protection_instances=instances,
        precedence=precedence,
        attacker=AttackerModel(expertise="professional", effort_budget=2),
        thresholds=Thresholds(
            max_depth=8,
            max_paths_per_asset=64,
            secondary_asset_depth=1,
            secondary_asset_factor=0.25,
            lmax=2,
            beam_width=64,
            aggregator="product",
            metric_bands=(
                MetricBand("cyclomatic", 5.0, 25.0, "complexity", -1, 1),
                MetricBand("sloc", 20.0, 200.0, "complexity", -1, 1),
            ),
            budgets=OverheadVector(
                client_time=11.0,
                server_time=4.0,
                client_memory=16.0,
                server_memory=6.0,
                network_traffic=8.0,
            ),
        ),
        hiding=HidingParams(gamma=2),
    )
