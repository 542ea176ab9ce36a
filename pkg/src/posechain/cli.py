"""``posechain`` command line.

Each subcommand reads and writes the file formats of :mod:`posechain.fileio`.
Exit status is 0 on success, 1 when a command fails and 2 on usage errors.
Wall-clock timings go to the terminal only, never into output files, so
repeated runs with the same inputs and seed produce identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, ensemble, fileio, imagequality, synth
from .errors import DimensionMismatch, ImageTooSmall, MissingImage, MissingPose, PosechainError, StackTooSmall
from .handeye import CalibrationResult, RefineOptions, apply_calibration, calibrate
from .kinematics import batch_fk
from .metrics import absolute_pose_error, rrms, umeyama_align
from .planner import HemispherePlan, hemisphere_poses, tool_poses
from .se3 import SimilarityTransform
from .trajectory import Trajectory

log = logging.getLogger("posechain")


class _Run:
    """Per-invocation context: output directory, report mode and timing."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.json = args.json
        self.out = Path(args.out) if args.out else None
        self.t0 = time.perf_counter()
        self.report: dict = {"command": args.command}

    def out_path(self, name: str) -> Path:
        if self.out is None:
            raise PosechainError("--out is required for this command")
        return self.out / name

    def say(self, text: str) -> None:
        if not self.json:
            print(text)

    def finish(self) -> None:
        elapsed = time.perf_counter() - self.t0
        self.report["elapsed_s"] = elapsed
        if self.json:
            print(json.dumps(self.report, allow_nan=True, default=str))
        else:
            print(f"time: {elapsed:.3f} s")


def _config(args) -> dict:
    return fileio.read_json(args.config) if args.config else {}


# ---------------------------------------------------------------------------
# synth


def cmd_synth(run: _Run) -> None:
    d = _config(run.args)
    if run.args.seed is not None:
        d["seed"] = run.args.seed
    cfg = synth.SyntheticRigConfig.from_json(d)
    ds = synth.generate(cfg)
    files = {
        "config.json": lambda p: fileio.write_json(p, cfg.to_json()),
        "dh.json": lambda p: fileio.write_dh(p, cfg.chain),
        "target.json": lambda p: fileio.write_target(p, ds.target),
        "nominal_intrinsics.json": lambda p: fileio.write_intrinsics(p, cfg.nominal()),
        "calib_joints.csv": lambda p: fileio.write_joint_log(p, ds.calib_joints, cfg.chain.joint_count),
        "observations.csv": lambda p: fileio.write_observations(p, ds.calib_shots),
        "gt_calibration.json": lambda p: fileio.write_json(
            p, CalibrationResult.from_poses(cfg.hand_eye, cfg.world_base, cfg.intrinsics).to_json()
        ),
        "gt_calib_cameras.json": lambda p: fileio.write_trajectory(p, ds.calib_cameras),
    }
    if cfg.capture is not None:
        files["capture_joints.csv"] = lambda p: fileio.write_joint_log(p, ds.capture_joints, cfg.chain.joint_count)
        files["gt_capture_cameras.json"] = lambda p: fileio.write_trajectory(p, ds.capture_cameras)
    for name, write in files.items():
        write(run.out_path(name))
    run.report.update(
        {
            "seed": cfg.seed,
            "calibration_shots": len(ds.calib_shots),
            "capture_frames": len(ds.capture_joints),
            "files": sorted(files),
        }
    )
    run.say(f"synthetic rig (seed {cfg.seed}): {len(ds.calib_shots)} calibration shots, "
            f"{len(ds.capture_joints)} capture frames -> {run.out}")


# ---------------------------------------------------------------------------
# fk, calibrate, plan, export


def cmd_fk(run: _Run) -> None:
    a = run.args
    chain = fileio.read_dh(a.dh)
    joints = fileio.read_joint_log(a.joints)
    t = time.perf_counter()
    traj = batch_fk(chain, joints)
    fk_time = time.perf_counter() - t
    out = Path(a.output) if a.output else run.out_path("robot_poses.json")
    fileio.write_trajectory(out, traj)
    run.report.update({"frames": len(traj), "fk_time_s": fk_time, "output": str(out)})
    run.say(f"{len(traj)} poses -> {out} (forward kinematics {fk_time:.3f} s)")


def _robot_poses(a) -> Trajectory:
    if a.robot_poses:
        return fileio.read_trajectory(a.robot_poses)
    if a.joints and a.dh:
        return batch_fk(fileio.read_dh(a.dh), fileio.read_joint_log(a.joints))
    raise PosechainError("robot poses need --robot-poses, or --joints together with --dh")


def cmd_calibrate(run: _Run) -> None:
    a = run.args
    target = fileio.read_target(a.target)
    shots = fileio.read_observations(a.observations)
    robot = _robot_poses(a)
    with_pose = []
    for s in shots:
        pose = robot.get(s.frame_id)
        if pose is None:
            raise MissingPose(f"no robot pose for observed frame {s.frame_id!r}")
        with_pose.append(s.with_robot_pose(pose))
    nominal = fileio.read_intrinsics(a.intrinsics)
    opts = RefineOptions(max_iter=a.max_iter)
    result = calibrate(with_pose, target, nominal, opts)
    out = Path(a.output) if a.output else run.out_path("calibration.json")
    fileio.write_json(out, result.to_json())
    run.report.update({"rmst_mm": result.rmst, "rmsr_deg": result.rmsr, "rrms_px": result.rrms,
                       "iterations": result.iterations, "converged": result.converged, "output": str(out)})
    run.say(f"{len(with_pose)} shots: {result.summary()}")
    run.say(f"iterations: {result.iterations}, converged: {result.converged} -> {out}")


def cmd_plan(run: _Run) -> None:
    a = run.args
    plan = HemispherePlan.from_json(_config(a))
    views = hemisphere_poses(plan)
    fileio.write_json(run.out_path("plan.json"), plan.to_json())
    fileio.write_trajectory(run.out_path("camera_poses.json"), views.camera_poses)
    run.report["views"] = len(views.camera_poses)
    if a.calibration:
        cal = CalibrationResult.from_json(fileio.read_json(a.calibration))
        tools = tool_poses(views, cal.hand_eye, cal.world_base)
        fileio.write_trajectory(run.out_path("tool_poses.json"), tools)
        fileio.write_tool_poses_csv(run.out_path("tool_poses.csv"), tools)
        run.report["tool_poses"] = len(tools)
    run.say(f"{len(views.camera_poses)} views "
            f"({len(plan.elevations())} elevations x {len(plan.longitudes())} longitudes) -> {run.out}")


def cmd_export_manifest(run: _Run) -> None:
    a = run.args
    robot = fileio.read_trajectory(a.trajectory)
    cal = CalibrationResult.from_json(fileio.read_json(a.calibration))
    cameras = robot.map(lambda p: apply_calibration(p, cal))
    if a.images:
        found = fileio.list_images(a.images)
        missing = [fid for fid in robot.frame_ids if fid not in found]
        if missing:
            raise MissingImage(f"{len(missing)} frame(s) have no image in {a.images}, first: {missing[0]!r}")
        paths = {fid: f"{a.image_prefix}{found[fid].name}" for fid in robot.frame_ids}
    else:
        paths = {fid: f"{a.image_prefix}{fid}{a.image_ext}" for fid in robot.frame_ids}
    out = Path(a.output) if a.output else run.out_path("transforms.json")
    fileio.write_manifest(out, fileio.build_manifest(cameras, cal.intrinsics, paths))
    run.report.update({"frames": len(cameras), "output": str(out)})
    run.say(f"{len(cameras)} frames -> {out}")


# ---------------------------------------------------------------------------
# evaluation


def _load_cameras(path) -> Trajectory:
    """Trajectory JSON of ``c_from_w`` poses, or a dataset manifest."""
    data = fileio.read_json(path)
    if isinstance(data, dict) and "frames" in data:
        _, frames = fileio.read_manifest(path)
        return fileio.manifest_camera_poses(frames)
    return fileio.read_trajectory(path)


def cmd_eval_traj(run: _Run) -> None:
    a = run.args
    source, reference = _load_cameras(a.source), _load_cameras(a.reference)
    if a.align == "none":
        alignment = SimilarityTransform.identity()
    else:
        alignment = umeyama_align(source, reference, with_scale=a.align == "similarity")
    report = absolute_pose_error(source, reference, alignment)
    doc = report.to_dict()
    doc["align"] = a.align
    line = f"MTE {report.mte:.3f} mm, MRE {report.mre:.4f}°"
    if a.observations:
        if not (a.target and a.intrinsics):
            raise PosechainError("RRMS needs --target and --intrinsics with --observations")
        shots = fileio.read_observations(a.observations)
        doc["rrms_px"] = rrms(shots, source, fileio.read_intrinsics(a.intrinsics), fileio.read_target(a.target))
        line += f", RRMS {doc['rrms_px']:.2f} px"
    fileio.write_json(run.out_path("pose_errors.json"), doc)
    fileio.write_csv(
        run.out_path("pose_errors.csv"),
        ["frame_id", "translation_error_mm", "rotation_error_deg"],
        ([f, repr(te), repr(re)] for f, te, re in report.per_frame),
    )
    run.report.update({k: doc[k] for k in ("mte_mm", "mre_deg", "frames")})
    if "rrms_px" in doc:
        run.report["rrms_px"] = doc["rrms_px"]
    run.say(f"{len(report.per_frame)} frames: {line}")


def cmd_eval_images(run: _Run) -> None:
    a = run.args
    renders, refs = fileio.list_images(a.renders), fileio.list_images(a.references)
    names = [n for n in refs if n in renders]
    if not names:
        raise PosechainError("no image names in common between the two directories")
    rows, skipped = [], []
    for name in names:
        img, ref = fileio.read_image(renders[name]), fileio.read_image(refs[name])
        try:
            rows.append((name, imagequality.psnr(img, ref), imagequality.ssim(img, ref)))
        except (DimensionMismatch, ImageTooSmall) as exc:
            log.warning("skipping %s: %s", name, exc)
            skipped.append(name)
    if not rows:
        raise PosechainError(f"all {len(skipped)} image pair(s) were skipped")
    report = imagequality.aggregate(rows)
    report.skipped = skipped
    fileio.write_json(run.out_path("quality.json"), report.to_dict())
    fileio.write_csv(
        run.out_path("quality.csv"),
        ["name", "psnr_db", "ssim"],
        ([n, "inf" if math.isinf(p) else repr(p), repr(s)] for n, p, s in rows),
    )
    run.report.update({"summary": report.format(), "n": report.n, "skipped": len(skipped)})
    run.say(f"{report.n} images, {len(skipped)} skipped: PSNR / SSIM = {report.format()}")


def _preview(m: np.ndarray) -> np.ndarray:
    peak = float(np.max(m))
    return m / peak if peak > 0 else m


def cmd_ensemble(run: _Run) -> None:
    a = run.args
    if len(a.members) < 2:
        raise StackTooSmall(f"ensemble needs at least 2 member directories, got {len(a.members)}")
    member_sets = [fileio.list_images(d) for d in a.members]
    refs = fileio.list_images(a.reference)
    density_dir = Path(a.density) if a.density else None
    summary = {"members": len(a.members), "views": []}
    for name, ref_path in refs.items():
        missing = [d for d, s in zip(a.members, member_sets) if name not in s]
        if missing:
            raise MissingImage(f"view {name!r} is missing from member directory {missing[0]}")
        stack = [fileio.read_image(s[name]) for s in member_sets]
        density = fileio.read_pfm(density_dir / f"{name}.pfm") if density_dir else None
        rep = ensemble.uq_report(stack, fileio.read_image(ref_path), density)
        maps = rep.maps
        fileio.write_pfm(run.out_path(f"{name}_mean.pfm"), maps.mean)
        fileio.write_png(run.out_path(f"{name}_mean.png"), maps.mean)
        for label, m in (("std", maps.std), ("residual", maps.residual), ("density_weighted", maps.density_weighted)):
            if m is None:
                continue
            fileio.write_pfm(run.out_path(f"{name}_{label}.pfm"), m)
            fileio.write_png(run.out_path(f"{name}_{label}.png"), _preview(m))
        summary["views"].append({"name": name, **rep.to_dict()})
    corr = [v["correlation"] for v in summary["views"] if v["correlation"] is not None]
    summary["mean_correlation"] = float(np.mean(corr)) if corr else None
    fileio.write_json(run.out_path("uncertainty.json"), summary)
    run.report.update({"views": len(summary["views"]), "mean_correlation": summary["mean_correlation"]})
    shown = "undefined" if summary["mean_correlation"] is None else f"{summary['mean_correlation']:.3f}"
    run.say(f"{len(summary['views'])} views, {len(a.members)} members: std/residual correlation {shown}")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--json", action="store_true", help="print a machine-readable JSON report")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="posechain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"posechain {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    add("synth", cmd_synth, "generate a synthetic calibration and capture dataset")

    sp = add("fk", cmd_fk, "joint log to robot poses by forward kinematics")
    sp.add_argument("--joints", required=True, help="joint log CSV (frame_id,q1,...,qn; radians)")
    sp.add_argument("--dh", required=True, help="DH table JSON")
    sp.add_argument("-o", "--output", help="trajectory JSON (default: OUT/robot_poses.json)")

    sp = add("calibrate", cmd_calibrate, "hand-eye, world-base and intrinsic calibration")
    sp.add_argument("--observations", required=True, help="observations CSV (frame_id,point_id,u,v)")
    sp.add_argument("--target", required=True, help="target JSON")
    sp.add_argument("--intrinsics", required=True, help="nominal intrinsics JSON")
    sp.add_argument("--robot-poses", help="robot pose trajectory JSON")
    sp.add_argument("--joints", help="joint log CSV, used with --dh instead of --robot-poses")
    sp.add_argument("--dh", help="DH table JSON")
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("-o", "--output", help="result JSON (default: OUT/calibration.json)")

    sp = add("plan", cmd_plan, "hemispherical capture plan (config: plan JSON)")
    sp.add_argument("--calibration", help="calibration JSON; adds robot tool poses to the plan")

    sp = add("export-manifest", cmd_export_manifest, "robot poses and calibration to a dataset manifest")
    sp.add_argument("--trajectory", required=True, help="robot pose trajectory JSON")
    sp.add_argument("--calibration", required=True, help="calibration JSON")
    sp.add_argument("--images", help="image directory; every frame id must have an image there")
    sp.add_argument("--image-prefix", default="images/", help="path prefix written before each file name")
    sp.add_argument("--image-ext", default=".png", help="extension used when --images is not given")
    sp.add_argument("-o", "--output", help="manifest JSON (default: OUT/transforms.json)")

    sp = add("eval-traj", cmd_eval_traj, "absolute pose error of camera trajectories")
    sp.add_argument("--source", required=True, help="trajectory or manifest to evaluate")
    sp.add_argument("--reference", required=True, help="reference trajectory or manifest")
    sp.add_argument("--align", choices=("none", "rigid", "similarity"), default="rigid")
    sp.add_argument("--with-scale", dest="align", action="store_const", const="similarity",
                    help="same as --align similarity")
    sp.add_argument("--observations", help="observations CSV for an RRMS of the source poses")
    sp.add_argument("--target", help="target JSON (with --observations)")
    sp.add_argument("--intrinsics", help="intrinsics JSON (with --observations)")

    sp = add("eval-images", cmd_eval_images, "PSNR and SSIM of renders against references")
    sp.add_argument("--renders", required=True)
    sp.add_argument("--references", required=True)

    sp = add("ensemble", cmd_ensemble, "ensemble mean, spread and residual maps")
    sp.add_argument("--members", nargs="+", required=True, help="one render directory per ensemble member")
    sp.add_argument("--reference", required=True, help="reference image directory")
    sp.add_argument("--density", help="directory of accumulated-density PFM maps named like the images")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    run = _Run(args)
    try:
        args.func(run)
    except (PosechainError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"posechain {args.command}: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    run.finish()
    return 0


if __name__ == "__main__":
    sys.exit(main())
