"""Operator command line; every subcommand works directly on a data directory."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..errors import RadbenchError
from .config import load_config
from .service import Platform


def _platform(ctx: click.Context) -> Platform:
    obj = ctx.obj
    if "platform" not in obj:
        cfg = load_config(obj["config_path"], data_dir=obj["data_dir"])
        obj["platform"] = Platform(cfg)
    return obj["platform"]


def _emit(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except RadbenchError as exc:
            click.echo(json.dumps({"error": exc.to_dict()}, sort_keys=True), err=True)
            sys.exit(2)


@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None, help="Overrides data_dir from the config.")
@click.pass_context
def main(ctx, config_path, data_dir):
    """Stratified benchmarking platform for AI radiology systems."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, data_dir=data_dir)


@main.command("register-actor")
@click.option("--kind", required=True, type=click.Choice(["Developer", "Facility", "PanelRadiologist", "TestRadiologist"]))
@click.option("--country", required=True)
@click.option("--name", "display_name", required=True)
@click.pass_context
def register_actor(ctx, kind, country, display_name):
    p = _platform(ctx)
    _emit(p.get_actor(p.register_actor(kind, country, display_name)).to_dict())


@main.command("verify-actor")
@click.argument("actor_id")
@click.pass_context
def verify_actor(ctx, actor_id):
    """Mark an actor verified and print its API token (shown once)."""
    _emit({"actor_id": actor_id, "token": _platform(ctx).verify_actor(actor_id)})


@main.command("register-dataset")
@click.option("--condition", required=True)
@click.option("--labels", required=True, help="Comma-separated label vocabulary.")
@click.option("--single-gender", is_flag=True)
@click.pass_context
def register_dataset(ctx, condition, labels, single_gender):
    p = _platform(ctx)
    set_id = p.register_dataset(condition, [s.strip() for s in labels.split(",")], single_gender)
    _emit(p.registry_entry(set_id))


@main.command("join-panel")
@click.argument("set_id")
@click.option("--actor", "actor_id", required=True)
@click.pass_context
def join_panel(ctx, set_id, actor_id):
    p = _platform(ctx)
    p.join_panel(set_id, actor_id)
    _emit(p.registry_entry(set_id))


@main.command()
@click.argument("set_id")
@click.argument("metadata_csv", type=click.File("r", encoding="utf-8"))
@click.option("--facility", "facility_id", required=True)
@click.pass_context
def ingest(ctx, set_id, metadata_csv, facility_id):
    """Stage a facility metadata batch (case_id,image_ref,label,sex,age,country)."""
    _emit(_platform(ctx).ingest(set_id, facility_id, metadata_csv.read()))


@main.command()
@click.argument("set_id")
@click.argument("action", type=click.Choice(["StartReview", "Approve", "Reject"]))
@click.option("--reviewer", required=True)
@click.pass_context
def review(ctx, set_id, action, reviewer):
    state = _platform(ctx).review(set_id, reviewer, action)
    _emit({"set_id": set_id, "review_state": state.value})


@main.command("export-package")
@click.argument("set_id")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.pass_context
def export_package(ctx, set_id, out_dir):
    pkg = _platform(ctx).export_package(set_id)
    path = pkg.write(out_dir)
    _emit({"written": str(path), **pkg.metadata(), "cases": len(pkg.images)})


@main.command()
@click.argument("set_id")
@click.argument("submission_csv", type=click.File("r", encoding="utf-8"))
@click.option("--actor", "actor_id", required=True, help="Verified Developer or TestRadiologist id.")
@click.option("--origin", "origin_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Origin sidecar JSON (kind, development_country / radiologist_country).")
@click.option("--country", default=None, help="Shorthand for the origin country.")
@click.pass_context
def score(ctx, set_id, submission_csv, actor_id, origin_path, country):
    origin = {}
    if origin_path:
        origin = json.loads(Path(origin_path).read_text(encoding="utf-8"))
    if country:
        origin["country"] = country
    p = _platform(ctx)
    submission_id = p.score_submission(set_id, submission_csv.read(), origin, actor_id=actor_id)
    _emit(p.get_submission(submission_id).to_dict())


@main.command()
@click.argument("submission_id")
@click.pass_context
def report(ctx, submission_id):
    click.echo(_platform(ctx).get_report(submission_id))


@main.command()
@click.argument("set_id")
@click.option("--submitter", default=None, help="Only this submitter's entries.")
@click.pass_context
def leaderboard(ctx, set_id, submitter):
    _emit(_platform(ctx).leaderboard(set_id, submitter))


@main.command("audit-privacy")
@click.argument("set_id")
@click.option("-k", "k", type=int, default=None)
@click.pass_context
def audit_privacy(ctx, set_id, k):
    p = _platform(ctx)
    violations = p.privacy_audit(set_id, k)
    _emit({"set_id": set_id, "k": k or p.config.k, "passes": not violations, "violations": violations})
    if violations:
        sys.exit(1)


@main.command()
@click.pass_context
def snapshot(ctx):
    p = _platform(ctx)
    p.snapshot()
    _emit({"snapshot_seq": p.snapshot_seq})


@main.command()
@click.pass_context
def recover(ctx):
    """Finish scoring submissions interrupted after intake."""
    _emit({"rescored": _platform(ctx).resume_pending()})


@main.command("render-report")
@click.argument("submission_id")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.pass_context
def render_report_cmd(ctx, submission_id, out_dir):
    from .render import render_report

    doc = json.loads(_platform(ctx).get_report(submission_id))
    _emit({"written": [str(p) for p in render_report(doc, out_dir)]})


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    import uvicorn

    from .api import create_app

    p = _platform(ctx)
    uvicorn.run(create_app(p), host=host or p.config.host, port=port or p.config.port)


if __name__ == "__main__":
    main()
