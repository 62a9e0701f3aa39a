"""Command-line entry point: ``tdsv <command> [options]``.

Data goes to files or stdout; diagnostics go to stderr.  Options may also be
given in a ``key = value`` file via ``--config``; command-line flags win.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .archshapes import resnet_shapes, tdnn_shapes
from .errors import MissingInputError, TdsvError
from .features import FeatureConfig, logmel_frames, read_wav, stft_frames
from .metrics import DcfParams, ScoreSet, eer, min_dcf
from .pooling import (
    GvladParams,
    LocallyConnectedParams,
    PoolingConfig,
    SapParams,
    pool,
)
from .scoring import (
    AsNormConfig,
    CohortSet,
    CohortSizeWarning,
    CompensationConfig,
    fuse,
    score_trials,
)
from .trials import SynthConfig, build_cohort, combine_enrollment, synth_generate

log = logging.getLogger("tdsv")


def resolve_threads(requested: int | None) -> int:
    """Thread count from ``--threads``, capped by ``TDSV_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("TDSV_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _ordered_map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool_:
        return list(pool_.map(fn, items))


def _out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def cmd_extract(args) -> int:
    cfg = FeatureConfig(args.window_len, args.hop_len, args.n_fft, args.n_mels, args.log_floor)
    wavs = sorted(Path(args.wav_dir).glob("*.wav"))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not wavs:
        log.warning("no .wav files in %s", args.wav_dir)
        return 0
    featurize = logmel_frames if args.kind == "logmel" else stft_frames

    def one(path):
        try:
            fm = featurize(read_wav(path), cfg)
            io.write_fmx(out_dir / f"{path.stem}.fmx", fm)
            return None
        except (TdsvError, OSError, ValueError) as exc:
            return f"{path.name}: {exc}"

    failures = [f for f in _ordered_map(one, wavs, resolve_threads(args.threads)) if f]
    for msg in failures:
        log.error("extract failed: %s", msg)
    log.info("extracted %d of %d files", len(wavs) - len(failures), len(wavs))
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# pool
# ---------------------------------------------------------------------------


def _random_params(method, dim, args):
    if method == "CLP":
        return LocallyConnectedParams.random(args.seed, 29, dim, args.lc_dim, args.activation)
    if method == "SAP":
        return SapParams.random(args.seed, dim)
    return GvladParams.random(args.seed, dim, args.clusters, args.ghosts)


def cmd_pool(args) -> int:
    frame_files = sorted(Path(args.frames).glob("*.fmx"))
    if not frame_files:
        log.warning("no .fmx files in %s", args.frames)
    method = args.method
    if method == "CLP" and not args.posteriors:
        raise MissingInputError("CLP pooling needs --posteriors")
    cfg = PoolingConfig(args.tau, method)
    params = None
    if method != "SP":
        if args.params:
            params = io.params_from_blocks(io.read_params(args.params), method)
        elif frame_files:
            params = _random_params(method, io.read_fmx(frame_files[0]).dim, args)
            log.info("using seeded random %s parameters (seed=%d)", method, args.seed)
        if params is not None and args.save_params:
            io.write_params(args.save_params, io.params_to_blocks(params))
            # Pool with the stored f32 copy so reloading reproduces this run.
            params = io.params_from_blocks(io.read_params(args.save_params), method)

    def one(path):
        fm = io.read_fmx(path)
        post = None
        if method == "CLP":
            post = io.read_cpm(Path(args.posteriors) / f"{path.stem}.cpm")
        return path.stem, pool(fm, method, post, params, cfg)

    embeddings = dict(_ordered_map(one, frame_files, resolve_threads(args.threads)))
    io.write_embeddings(args.out, embeddings)
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def _lookup(table, key, what):
    try:
        return table[key]
    except KeyError:
        raise MissingInputError(f"unresolved {what} id {key!r}") from None


def load_scoring_inputs(args):
    """Resolve trial ids to model/test embeddings and posteriors."""
    pairs = io.read_trials(args.trials)
    utt_emb = io.read_embeddings(args.embeddings)
    utt_post = io.read_phrase_posteriors(args.posteriors) if args.posteriors else None

    model_ids = list(dict.fromkeys(m for m, _ in pairs))
    model_emb, model_post = {}, ({} if utt_post is not None else None)
    enroll = io.read_enroll_map(args.enroll_map) if args.enroll_map else None
    for mid in model_ids:
        if enroll is None:
            model_emb[mid] = _lookup(utt_emb, mid, "model")
            if utt_post is not None:
                model_post[mid] = _lookup(utt_post, mid, "model posterior")
            continue
        utts = _lookup(enroll, mid, "enrollment model")
        embs = [_lookup(utt_emb, u, "enrollment utterance") for u in utts]
        posts = [_lookup(utt_post, u, "enrollment posterior") for u in utts] if utt_post else None
        model_emb[mid], post = combine_enrollment(embs, posts)
        if utt_post is not None:
            model_post[mid] = post

    test_emb, test_post = {}, ({} if utt_post is not None else None)
    for _, tid in pairs:
        test_emb[tid] = _lookup(utt_emb, tid, "test utterance")
        if utt_post is not None:
            test_post[tid] = _lookup(utt_post, tid, "test posterior")

    cohort = None
    if args.cohort:
        entries = io.read_embeddings(args.cohort)
        cohort = CohortSet(tuple(entries), np.stack(list(entries.values())))
    return pairs, model_emb, test_emb, cohort, model_post, test_post


def cmd_score(args) -> int:
    pairs, model_emb, test_emb, cohort, model_post, test_post = load_scoring_inputs(args)
    asnorm_cfg = AsNormConfig(args.top_n)
    comp_cfg = CompensationConfig(args.alpha)
    if cohort is not None and len(cohort) < asnorm_cfg.top_n:
        log.warning("cohort has %d entries < top_n=%d; using all", len(cohort), asnorm_cfg.top_n)
    threads = resolve_threads(args.threads)
    chunk = max(1, -(-len(pairs) // threads))
    chunks = [pairs[i:i + chunk] for i in range(0, len(pairs), chunk)]

    def one(part):
        return score_trials(part, model_emb, test_emb, cohort, model_post, test_post,
                            asnorm_cfg, comp_cfg)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CohortSizeWarning)
        results = _ordered_map(one, chunks, threads)
    rows = []
    for part, res in zip(chunks, results):
        for i, (mid, tid) in enumerate(part):
            row = [mid, tid, res.total[i]]
            if args.diagnostics:
                row += [res.raw[i], res.spk_norm[i], res.phr[i], res.total[i]]
            rows.append(row)
    header = ("raw", "spk_norm", "phr", "total") if args.diagnostics else ()
    fh = _out(args.out)
    try:
        io.write_scores(fh, rows, header)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


# ---------------------------------------------------------------------------
# fuse / eval
# ---------------------------------------------------------------------------


def cmd_fuse(args) -> int:
    systems = [io.read_scores(p) for p in args.scores]
    order = [(m, t) for m, t, _ in systems[0]]
    columns = []
    for path, system in zip(args.scores, systems):
        table = {(m, t): s for m, t, s in system}
        if len(table) != len(order) or any(k not in table for k in order):
            raise MissingInputError(f"{path}: trial set differs from {args.scores[0]}")
        columns.append([table[k] for k in order])
    fused = fuse(columns)
    fh = _out(args.out)
    try:
        io.write_scores(fh, [(m, t, s) for (m, t), s in zip(order, fused)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def format_report(result: dict) -> str:
    return "\n".join([
        f"trials: {result['n_target']} target, {result['n_nontarget']} nontarget",
        f"EER[%]: {100 * result['eer']:.2f}",
        f"MinDCF: {result['mindcf']:.4f}",
        f"eer={100 * result['eer']:.2f}%",
        f"mindcf={result['mindcf']:.4f}",
    ]) + "\n"


def cmd_eval(args) -> int:
    scores = io.read_scores(args.scores)
    key = io.read_key(args.key)
    labels = []
    for mid, tid, _ in scores:
        if (mid, tid) not in key:
            raise MissingInputError(f"trial {mid}\t{tid} is not in the key")
        labels.append(key[mid, tid][0])
    values = np.array([s for _, _, s in scores])
    labels = np.array(labels, dtype=bool)
    s = ScoreSet.from_labels(values, labels)
    p = DcfParams(args.p_target, args.c_miss, args.c_fa)
    report = format_report({
        "eer": eer(s), "mindcf": min_dcf(s, p),
        "n_target": s.targets.size, "n_nontarget": s.nontargets.size,
    })
    sys.stdout.write(report)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# synth / shapes
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = SynthConfig(**{f.name: getattr(args, f.name) for f in fields(SynthConfig)})
    ds = synth_generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_embeddings(out / "embeddings.emb", {u.id: u.embedding for u in ds.utterances})
    io.write_phrase_posteriors(out / "posteriors.ppo", {u.id: u.phrase_posterior for u in ds.utterances})
    cohort = build_cohort(ds.cohort_utterances)
    io.write_embeddings(out / "cohort.emb", dict(zip(cohort.ids, cohort.embeddings)))
    io.write_enroll_map(out / "enroll.map", ds.enroll_map)
    io.write_trials(out / "trials.lst", [(t.model_id, t.test_id) for t in ds.trials])
    io.write_key(out / "key.tsv", [(t.model_id, t.test_id, t.truth.key_label, t.truth.value)
                                   for t in ds.trials])
    log.info("wrote %d utterances, %d models, %d trials to %s",
             len(ds.utterances), len(ds.models), len(ds.trials), out)
    return 0


def cmd_shapes(args) -> int:
    if args.arch == "resnet":
        report = resnet_shapes(args.frames)
    else:
        report = tdnn_shapes(args.frames, args.variant, args.classes)
    if args.format in ("table", "both"):
        print(report.as_table())
    if args.format in ("kv", "both"):
        print(report.as_key_values())
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdsv", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file with option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (capped by TDSV_THREADS)")

    p = sub.add_parser("extract", help="WAV directory -> FMX1 feature files")
    p.add_argument("wav_dir")
    p.add_argument("out_dir")
    p.add_argument("--kind", choices=("logmel", "stft"), default="logmel")
    d = FeatureConfig()
    p.add_argument("--window-len", type=float, default=d.window_len)
    p.add_argument("--hop-len", type=float, default=d.hop_len)
    p.add_argument("--n-fft", type=int, default=d.n_fft)
    p.add_argument("--n-mels", type=int, default=d.n_mels)
    p.add_argument("--log-floor", type=float, default=d.log_floor)
    threads(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pool", help="FMX1 directory -> EMB1 embeddings")
    p.add_argument("--frames", required=True, help="directory of .fmx files")
    p.add_argument("--method", choices=("SP", "SAP", "GVP", "CLP"), default="SP")
    p.add_argument("--posteriors", help="directory of .cpm files (CLP)")
    p.add_argument("--params", help="PRM1 parameter file")
    p.add_argument("--save-params", help="write the parameters used to this PRM1 file")
    p.add_argument("--seed", type=int, default=0, help="seed for random parameters")
    p.add_argument("--tau", type=float, default=PoolingConfig().tau)
    p.add_argument("--lc-dim", type=int, default=20)
    p.add_argument("--activation", choices=("relu", "tanh", "identity"), default="relu")
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--ghosts", type=int, default=2)
    p.add_argument("--out", required=True)
    threads(p)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("score", help="score trials: cosine -> AS-Norm -> compensation")
    p.add_argument("--trials", required=True)
    p.add_argument("--embeddings", required=True, help="EMB1 utterance (or model) embeddings")
    p.add_argument("--enroll-map", help="model-id<TAB>utt1,utt2,utt3")
    p.add_argument("--cohort", help="EMB1 cohort; enables AS-Norm")
    p.add_argument("--posteriors", help="PPO1 phrase posteriors; enables compensation")
    p.add_argument("--top-n", type=int, default=AsNormConfig().top_n)
    p.add_argument("--alpha", type=float, default=CompensationConfig().alpha)
    p.add_argument("--diagnostics", action="store_true",
                   help="add raw, spk_norm, phr, total columns")
    p.add_argument("--out", default="-")
    threads(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fuse", help="equal-weight sum of score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="EER and MinDCF of a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    dcf = DcfParams()
    p.add_argument("--p-target", type=float, default=dcf.p_target)
    p.add_argument("--c-miss", type=float, default=dcf.c_miss)
    p.add_argument("--c-fa", type=float, default=dcf.c_fa)
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic speaker x phrase benchmark")
    p.add_argument("--out", required=True)
    for f in fields(SynthConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("shapes", help="layer output sizes of the front-ends")
    p.add_argument("--arch", choices=("tdnn", "resnet"), required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--variant", choices=("clp_embedding", "phrase_classifier"),
                   default="clp_embedding")
    p.add_argument("--classes", type=int, default=None, help="N speakers or M phrases")
    p.add_argument("--format", choices=("table", "kv", "both"), default="both")
    p.set_defaults(func=cmd_shapes)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = io.read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in overrides.items():
            if key not in known:
                parser.error(f"{args.config}: unknown option {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (TdsvError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
