"""Command-line front end for constructions, certificates, and training runs.

Exit codes: 0 success or certificate issued; 1 verified failure (refused
certificate, infeasible construction budget, unsuccessful training); 2 usage
or I/O error.  Option precedence is flags, then --config JSON, then built-in
defaults.  Files carry 17 significant digits so they re-parse exactly;
console summaries round to 4.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .activations import KINDS, Activation
from .certifier import (CertificationRefused, build_g, canonical_pairs,
                        certify_self_intersection)
from .constructions import (ConstructionError, build_leaky_from_elu,
                            build_leaky_from_leaky, build_relu_from_iteration,
                            build_relu_from_softplus)
from .experiments import (TrainConfig, depth_sweep, gen_disk, mse_losses,
                          save_dataset, train)
from .netcore import Box, NetFormatError
from .netcore import load as load_net
from .netcore import save as save_net
from .netcore import sup_gap

_CANONICAL_KIND = {k.lower(): k for k in KINDS}
# the construct subcommand's short family names double as kind aliases
_CANONICAL_KIND["leaky"] = "LeakyReLU"


def _g17(x) -> str:
    return format(float(x), ".17g")


def _g4(x) -> str:
    return format(float(x), ".4g")


class _Settings:
    """Resolved option lookup: flag value, else config-file value, else default."""

    def __init__(self, flags: dict, file_values: dict):
        self.flags = flags
        self.file_values = file_values

    def get(self, name, default=None):
        value = self.flags.get(name)
        if value is not None:
            return value
        if name in self.file_values:
            return self.file_values[name]
        return default


def _load_settings(args):
    errors = []
    file_values = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            with open(cfg_path) as fh:
                file_values = json.load(fh)
            if not isinstance(file_values, dict):
                errors.append("config file: expected a JSON object of option values")
                file_values = {}
        except OSError as exc:
            errors.append(f"config file: {exc}")
        except json.JSONDecodeError as exc:
            errors.append(f"config file: {exc}")
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    return _Settings(flags, file_values), errors


def _report_errors(errors) -> int:
    print("invalid configuration:", file=sys.stderr)
    for err in errors:
        print(f"  - {err}", file=sys.stderr)
    return 2


def _outdir(settings: _Settings) -> Path:
    value = settings.get("outdir")
    if value is None:
        value = os.environ.get("NARROWLAB_OUTDIR", ".")
    out = Path(value)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _activation_from(settings: _Settings, errors, key="act", default_kind="ELU"):
    raw = str(settings.get(key, default_kind))
    kind = _CANONICAL_KIND.get(raw.lower())
    if kind is None:
        errors.append(f"unknown activation kind {raw!r}; choices: {', '.join(KINDS)}")
        return None
    try:
        return Activation(kind,
                          beta=float(settings.get("beta", 1.0)),
                          lam=float(settings.get("lam", 1.0)))
    except ValueError as exc:
        errors.append(str(exc))
        return None


def _interval_from(settings: _Settings, errors, default=None):
    dom = settings.get("domain", default)
    if dom is None:
        errors.append("missing --domain LO HI")
        return None
    lo, hi = float(dom[0]), float(dom[1])
    if not lo < hi:
        errors.append(f"domain must satisfy lo < hi, got {lo} {hi}")
        return None
    return Box.interval(lo, hi)


def _load_net_arg(pathlike):
    """Load a network file, falling back to the packaged assets by name."""
    p = Path(pathlike)
    if p.exists():
        return load_net(p), str(p)
    asset = resources.files("narrowlab").joinpath("data", p.name)
    if asset.is_file():
        with resources.as_file(asset) as real:
            return load_net(real), str(real)
    raise FileNotFoundError(
        f"network file not found: {pathlike} (not on disk, not a packaged asset)"
    )


def _write_report(path: Path, entries) -> None:
    with open(path, "w") as fh:
        for key, value in entries:
            if isinstance(value, float):
                value = _g17(value)
            fh.write(f"{key} = {value}\n")


def cmd_construct(args, settings: _Settings) -> int:
    errors = []
    source = str(settings.get("source", "")).lower()
    target = str(settings.get("target", "")).lower()
    valid = {("leaky", "leaky"), ("elu", "leaky"),
             ("softplus", "relu"), ("iteration", "relu")}
    if (source, target) not in valid:
        errors.append(
            f"unsupported construction {source!r} -> {target!r}; "
            "choices: leaky->leaky, elu->leaky, softplus->relu, iteration->relu"
        )
    eps = settings.get("eps")
    if eps is None:
        errors.append("missing --eps")
    else:
        eps = float(eps)
    grid = int(settings.get("grid", 10001))

    report = None
    if not errors and (source, target) == ("leaky", "leaky"):
        alpha, beta = settings.get("alpha"), settings.get("beta")
        if alpha is None or beta is None:
            errors.append("leaky->leaky needs --alpha and --beta")
        domain = _interval_from(settings, errors)
        if not errors:
            report = build_leaky_from_leaky(float(alpha), float(beta), eps,
                                            domain, grid=grid)
    elif not errors and (source, target) == ("elu", "leaky"):
        alpha = settings.get("alpha")
        if alpha is None:
            errors.append("elu->leaky needs --alpha")
        domain = _interval_from(settings, errors)
        if not errors:
            report = build_leaky_from_elu(float(alpha), eps, domain, grid=grid)
    elif not errors and (source, target) == ("softplus", "relu"):
        beta = settings.get("beta")
        if beta is None:
            errors.append("softplus->relu needs --beta")
        domain = _interval_from(settings, errors, default=(-20.0, 20.0))
        if not errors:
            report = build_relu_from_softplus(float(beta), eps, domain, grid=grid)
    elif not errors:
        act = _activation_from(settings, errors, key="kind")
        domain = _interval_from(settings, errors)
        if not errors:
            report = build_relu_from_iteration(act, eps, domain, grid=grid)
    if errors:
        return _report_errors(errors)

    out = _outdir(settings)
    net_name = settings.get("out", f"{source}_to_{target}.net")
    net_path = out / net_name
    save_net(report.net, net_path)
    lo, hi = report.valid_domain.lows[0], report.valid_domain.highs[0]
    _write_report(out / f"{Path(net_name).stem}_report.txt", [
        ("source", source),
        ("target", target),
        ("epsilon", report.epsilon),
        ("measured_gap", report.measured_gap),
        ("stages", report.stages),
        ("domain_lo", float(lo)),
        ("domain_hi", float(hi)),
        ("depth", report.net.depth),
        ("width", report.net.width),
        ("net_file", str(net_path)),
    ])
    print(f"construct {source}->{target}: gap {_g4(report.measured_gap)} "
          f"<= eps {_g4(report.epsilon)}, depth {report.net.depth}, "
          f"wrote {net_path}")
    return 0


def cmd_verify(args, settings: _Settings) -> int:
    errors = []
    net_arg = settings.get("net")
    if net_arg is None:
        errors.append("missing --net")
    # --alpha names a leaky slope everywhere else, so honor it here too
    if settings.get("alpha") is not None and settings.get("beta") is None:
        settings.flags["beta"] = settings.get("alpha")
    act = _activation_from(settings, errors, key="target", default_kind="ReLU")
    domain = _interval_from(settings, errors)
    grid = int(settings.get("grid", 10001))
    if errors:
        return _report_errors(errors)
    net, resolved = _load_net_arg(net_arg)
    gap = sup_gap(net, act, domain, grid)
    print(f"net = {resolved}")
    print(f"sup_gap = {_g17(gap)}")
    eps = settings.get("eps")
    if eps is None:
        return 0
    ok = gap <= float(eps)
    print(f"verdict = {'within' if ok else 'exceeds'} eps {_g4(float(eps))}")
    return 0 if ok else 1


def cmd_certify(args, settings: _Settings) -> int:
    errors = []
    m = int(settings.get("m", 1))
    if m < 1:
        errors.append(f"--m must be >= 1, got {m}")
    grid = int(settings.get("grid", 101))
    if errors:
        return _report_errors(errors)
    pairs = canonical_pairs(m)
    g = build_g(m)
    candidate = settings.get("candidate")
    if candidate is not None:
        f, resolved = _load_net_arg(candidate)
        label = resolved
    else:
        f, label = g, "reference map (self-test)"
    cert = certify_self_intersection(f, g, pairs, grid)
    out = _outdir(settings)
    path = out / f"certificate_m{m}.json"
    with open(path, "w") as fh:
        json.dump(cert.to_dict(), fh, indent=1)
        fh.write("\n")
    print(f"certified: {label}")
    print(f"M = {_g4(cert.M)}, eps = {_g4(cert.epsilon)}, "
          f"collision residual = {_g4(cert.collision_residual)}")
    print(f"t1 = {np.array2string(np.asarray(cert.t1), precision=6)}, "
          f"t2 = {np.array2string(np.asarray(cert.t2), precision=6)}")
    print(f"wrote {path}")
    return 0


def cmd_gendata(args, settings: _Settings) -> int:
    k = settings.get("k")
    if k is None:
        return _report_errors(["missing --k"])
    k = int(k)
    train_ds, val_ds = gen_disk(k)
    out = _outdir(settings)
    train_path = out / f"disk_k{k}_train.csv"
    val_path = out / f"disk_k{k}_val.csv"
    save_dataset(train_ds, train_path)
    save_dataset(val_ds, val_path)
    print(f"wrote {train_path} ({len(train_ds)} points) and "
          f"{val_path} ({len(val_ds)} points)")
    return 0


def _train_config(settings: _Settings, errors):
    int_fields = ("decay_interval_steps", "max_steps", "seed", "eval_interval")
    float_fields = ("lr_init", "lr_decay", "success_threshold", "adam_beta1",
                    "adam_beta2", "adam_eps", "lr_floor")
    kwargs = {}
    defaults = TrainConfig()
    for name in int_fields:
        kwargs[name] = int(settings.get(name, getattr(defaults, name)))
    for name in float_fields:
        kwargs[name] = float(settings.get(name, getattr(defaults, name)))
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        errors.append(str(exc))
        return None


def _write_training_outputs(out: Path, prefix: str, report) -> None:
    _write_report(out / f"{prefix}_report.txt", [
        ("final_train_loss", report.final_train_loss),
        ("final_val_loss", report.final_val_loss),
        ("steps", report.steps),
        ("success", report.success),
        ("threshold", report.threshold),
    ])
    curve = np.array(report.loss_curve, dtype=float).reshape(-1, 3)
    np.savetxt(out / f"{prefix}_curve.csv", curve, fmt="%.17g", delimiter=",",
               header="step,train_loss,val_loss", comments="")
    save_net(report.net, out / f"{prefix}.net")


def cmd_train(args, settings: _Settings) -> int:
    errors = []
    width = settings.get("width")
    depth = settings.get("depth")
    k = settings.get("k")
    for name, val in (("--width", width), ("--depth", depth), ("--k", k)):
        if val is None:
            errors.append(f"missing {name}")
    act = _activation_from(settings, errors)
    cfg = _train_config(settings, errors)
    if errors:
        return _report_errors(errors)
    width, depth, k = int(width), int(depth), int(k)
    data = gen_disk(k)
    report = train(width, depth, act, data, cfg)
    out = _outdir(settings)
    prefix = f"train_w{width}_d{depth}_k{k}_s{cfg.seed}"
    _write_training_outputs(out, prefix, report)
    verdict = "success" if report.success else "no success"
    print(f"{verdict} after {report.steps} steps: "
          f"L={_g4(report.final_train_loss)} "
          f"Lval={_g4(report.final_val_loss)} "
          f"(threshold {_g4(report.threshold)}); wrote {out / prefix}_report.txt")
    return 0 if report.success else 1


def cmd_eval(args, settings: _Settings) -> int:
    errors = []
    net_arg = settings.get("net")
    k = settings.get("k")
    if net_arg is None:
        errors.append("missing --net")
    if k is None:
        errors.append("missing --k")
    if errors:
        return _report_errors(errors)
    net, resolved = _load_net_arg(net_arg)
    train_ds, val_ds = gen_disk(int(k))
    l_train, l_val = mse_losses(net, train_ds, val_ds)
    print(f"net = {resolved}")
    print(f"train_loss = {_g17(l_train)}")
    print(f"val_loss = {_g17(l_val)}")
    print(f"summary: L={_g4(l_train)} Lval={_g4(l_val)} on disk k={int(k)}")
    return 0


def cmd_sweep(args, settings: _Settings) -> int:
    errors = []
    width = settings.get("width")
    k = settings.get("k")
    depths = settings.get("depths")
    for name, val in (("--width", width), ("--k", k), ("--depths", depths)):
        if val is None:
            errors.append(f"missing {name}")
    act = _activation_from(settings, errors)
    cfg = _train_config(settings, errors)
    if errors:
        return _report_errors(errors)
    width, k = int(width), int(k)
    depths = [int(d) for d in depths]
    result = depth_sweep(width, act, k, depths, cfg)
    out = _outdir(settings)
    path = out / f"sweep_w{width}_k{k}.csv"
    with open(path, "w") as fh:
        fh.write("depth,steps,train_loss,val_loss,success\n")
        for depth, rep in zip(result.depths, result.reports):
            fh.write(f"{depth},{rep.steps},{_g17(rep.final_train_loss)},"
                     f"{_g17(rep.final_val_loss)},{int(rep.success)}\n")
    if result.minimal_depth is None:
        print(f"no depth in {depths} met the criterion; wrote {path}")
        return 1
    print(f"minimal successful depth = {result.minimal_depth}; wrote {path}")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="JSON file of option defaults")
    sub.add_argument("--outdir", help="output directory (default: "
                                      "$NARROWLAB_OUTDIR or current directory)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="narrowlab",
        description="Deep narrow network constructions, certificates, "
                    "and disk experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("construct", help="build an activation-substitution net")
    p.add_argument("--from", dest="source", required=False,
                   help="source family: leaky, elu, softplus, iteration")
    p.add_argument("--to", dest="target", required=False,
                   help="target family: leaky or relu")
    p.add_argument("--alpha", type=float, help="target leaky slope")
    p.add_argument("--beta", type=float, help="source family parameter")
    p.add_argument("--kind", help="source activation kind for iteration")
    p.add_argument("--lam", type=float, help="SELU outer scale")
    p.add_argument("--eps", type=float, help="sup-error budget")
    p.add_argument("--domain", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--grid", type=int, help="verification grid points")
    p.add_argument("--out", help="output net filename")
    _add_common(p)
    p.set_defaults(func=cmd_construct)

    p = subs.add_parser("verify", help="measure a net's sup gap to an activation")
    p.add_argument("--net", help="network file")
    p.add_argument("--target", help="reference activation kind")
    p.add_argument("--alpha", type=float, help=argparse.SUPPRESS)
    p.add_argument("--beta", type=float, help="reference activation parameter")
    p.add_argument("--lam", type=float, help="SELU outer scale")
    p.add_argument("--eps", type=float, help="pass/fail bound (optional)")
    p.add_argument("--domain", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--grid", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("certify", help="issue a self-intersection certificate")
    p.add_argument("--m", type=int, help="input dimension (default 1)")
    p.add_argument("--grid", type=int, help="grid points per axis (default 101)")
    p.add_argument("--candidate", help="network file to certify instead of "
                                       "the reference map")
    _add_common(p)
    p.set_defaults(func=cmd_certify)

    p = subs.add_parser("gendata", help="write disk datasets as CSV")
    p.add_argument("--k", type=int, help="angle multiplier")
    _add_common(p)
    p.set_defaults(func=cmd_gendata)

    for name, fn in (("train", cmd_train), ("sweep", cmd_sweep)):
        p = subs.add_parser(name, help=f"{name} on the disk dataset")
        p.add_argument("--width", type=int)
        if name == "train":
            p.add_argument("--depth", type=int)
        else:
            p.add_argument("--depths", nargs="+", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--act", help="activation kind (default ELU)")
        p.add_argument("--beta", type=float)
        p.add_argument("--lam", type=float)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        p.add_argument("--threshold", dest="success_threshold", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--lr-init", dest="lr_init", type=float)
        p.add_argument("--lr-decay", dest="lr_decay", type=float)
        p.add_argument("--eval-interval", dest="eval_interval", type=int)
        _add_common(p)
        p.set_defaults(func=fn)

    p = subs.add_parser("eval", help="evaluate a net file on the disk dataset")
    p.add_argument("--net", help="network file or packaged asset name")
    p.add_argument("--k", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    settings, errors = _load_settings(args)
    if errors:
        return _report_errors(errors)
    try:
        return args.func(args, settings)
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 1
    except CertificationRefused as exc:
        print(f"refused: {exc.reason}", file=sys.stderr)
        return 1
    except (NetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
