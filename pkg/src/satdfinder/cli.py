"""Command-line interface: local pattern mining and simulation, a service
runner, and thin HTTP-client subcommands for live review sessions."""

import json
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import httpx

from .corpus import load_corpus
from .patterns import fitness as pattern_fitness
from .patterns import mine_patterns


@click.group()
def main():
    """Two-step identification of self-admitted technical debt."""


@main.command("mine-patterns")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True),
              help="labeled CSV (projectname,classification,commenttext)")
@click.option("--exclude-project", default=None, help="hold one project out of mining")
@click.option("--threshold", default=0.8, show_default=True, type=float)
@click.option("--exponent", default=4, show_default=True, type=int)
def mine_patterns_cmd(train_path, exclude_project, threshold, exponent):
    """Mine strong SATD keyword patterns and print them as TSV."""
    corpus = load_corpus(train_path, "labeled_csv")
    if exclude_project:
        if exclude_project not in corpus.projects:
            raise click.ClickException(f"unknown project {exclude_project!r}")
        corpus = corpus.without_project(exclude_project)
    mined = mine_patterns(corpus, threshold=threshold, exponent=exponent)
    click.echo("pattern\tpositives\ttrue_positives\tprecision\tfitness")
    for stats in mined:
        click.echo(
            f"{stats.pattern}\t{stats.positives}\t{stats.true_positives}"
            f"\t{stats.precision:.4f}\t{pattern_fitness(stats, exponent):.4f}"
        )


@main.command("simulate")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--corrected", "corrected_path", default=None, type=click.Path(exists=True),
              help="alternate corrected-label CSV with the same schema")
@click.option("--rq", type=click.Choice(["1", "2", "3", "all"]), default="all", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--target-recall", default=0.9, show_default=True, type=float)
@click.option("--learner", default="rf", show_default=True)
def simulate(data_path, corrected_path, rq, out_dir, seed, target_recall, learner):
    """Run the leave-one-project-out experiments and write TSV tables."""
    from .experiments import ExperimentConfig, run_overall, run_step1, run_step2

    config = ExperimentConfig(
        data_path=data_path,
        corrected_path=corrected_path,
        out_dir=out_dir,
        seed=seed,
        target_recall=target_recall,
        learner=learner,
    )
    if rq in ("1", "all"):
        run_step1(config)
        click.echo(f"step 1 tables written to {out_dir}")
    if rq in ("2", "all"):
        run_step2(config)
        click.echo(f"step 2 tables written to {out_dir}")
    if rq in ("3", "all"):
        run_overall(config)
        click.echo(f"overall tables and curves written to {out_dir}")


@main.command("make-demo-data")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--projects", default=6, show_default=True, type=int)
@click.option("--comments", default=120, show_default=True, type=int,
              help="comments per project")
def make_demo_data(out_dir, seed, projects, comments):
    """Write a synthetic labeled + unlabeled CSV pair for demos and tests."""
    from .synth import synthetic_corpus, write_labeled_csv, write_unlabeled_csv

    names = tuple(f"proj{i}" for i in range(projects))
    corpus = synthetic_corpus(projects=names, comments_per_project=comments, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_labeled_csv(corpus, out / "labeled.csv", seed=seed)
    write_unlabeled_csv(corpus, out / "unlabeled.csv")
    click.echo(f"wrote {out / 'labeled.csv'} and {out / 'unlabeled.csv'}")


@main.command("serve")
@click.option("--train", "train_path", envvar="SATDFINDER_TRAIN", required=True,
              type=click.Path(exists=True), help="labeled training CSV")
@click.option("--data-dir", envvar="SATDFINDER_DATA_DIR", default="./satd-data",
              show_default=True, type=click.Path())
@click.option("--host", envvar="SATDFINDER_HOST", default="127.0.0.1", show_default=True)
@click.option("--port", envvar="SATDFINDER_PORT", default=8717, show_default=True, type=int)
@click.option("--default-learner", envvar="SATDFINDER_LEARNER", default="rf", show_default=True)
@click.option("--static-dir", envvar="SATDFINDER_STATIC", default=None, type=click.Path(),
              help="directory with the built web UI (served at /)")
def serve(train_path, data_dir, host, port, default_learner, static_dir):
    """Run the review service."""
    import uvicorn

    from .service.app import create_app
    from .service.store import ServiceStore

    store = ServiceStore(data_dir, train_path, default_learner=default_learner)
    recovered = store.recover()
    click.echo(f"patterns: {', '.join(store.patterns.tokens)}")
    if recovered:
        click.echo(f"recovered {recovered} session(s) from {data_dir}")
    app = create_app(store, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


# ---------------------------------------------------------------------------
# thin client
# ---------------------------------------------------------------------------


@contextmanager
def _client(server: str):
    try:
        with httpx.Client(base_url=server, timeout=120.0) as client:
            yield client
    except httpx.HTTPError as exc:
        raise click.ClickException(f"cannot reach server at {server}: {exc}") from exc


def _check(response: httpx.Response) -> dict:
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except json.JSONDecodeError:
            detail = response.text
        raise click.ClickException(f"server returned {response.status_code}: {detail}")
    if "json" in response.headers.get("content-type", ""):
        return response.json()
    return {}


def _echo_summary(view: dict) -> None:
    counters = view["counters"]
    estimate = view["estimate"]
    total = estimate["estimated_total"] if estimate["defined"] else None
    recall = view.get("estimated_recall")
    click.echo(
        f"session {view['session_id']} [{view['status']}] "
        f"easy={counters['easy_found']} labeled={counters['labeled']} "
        f"found={counters['found_hard']} remaining={counters['remaining']} "
        f"estimated_total={'-' if total is None else f'{total:.1f}'} "
        f"estimated_recall={'-' if recall is None else f'{recall:.2f}'} "
        f"suggest_stop={view['suggest_stop']}"
    )


@main.group("session")
@click.option("--server", envvar="SATDFINDER_SERVER", default="http://127.0.0.1:8717",
              show_default=True)
@click.pass_context
def session_group(ctx, server):
    """Operate a live review session over the service API."""
    ctx.obj = server


@session_group.command("create")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True),
              help="unlabeled CSV (projectname,commenttext)")
@click.option("--learner", default=None)
@click.option("--target-recall", default=0.9, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--batch-size", default=10, show_default=True, type=int)
@click.pass_obj
def session_create(server, csv_path, learner, target_recall, seed, batch_size):
    """Upload a corpus and start a review session on it."""
    with _client(server) as client:
        upload = _check(
            client.post(
                "/corpora",
                content=Path(csv_path).read_bytes(),
                headers={"content-type": "text/csv"},
            )
        )
        click.echo(f"corpus {upload['corpus_id']}: {upload['comments']} comments")
        body = {
            "corpus_id": upload["corpus_id"],
            "target_recall": target_recall,
            "seed": seed,
            "batch_size": batch_size,
        }
        if learner:
            body["learner"] = learner
        view = _check(client.post("/sessions", json=body))
    _echo_summary(view)


@session_group.command("show")
@click.argument("session_id")
@click.pass_obj
def session_show(server, session_id):
    with _client(server) as client:
        _echo_summary(_check(client.get(f"/sessions/{session_id}")))


@session_group.command("batch")
@click.argument("session_id")
@click.option("-n", "size", default=10, show_default=True, type=int)
@click.pass_obj
def session_batch(server, session_id, size):
    """Fetch the outstanding batch as id<TAB>text lines."""
    with _client(server) as client:
        view = _check(client.get(f"/sessions/{session_id}/batch", params={"n": size}))
    if not view["items"]:
        click.echo("no unlabeled comments remain", err=True)
        return
    for item in view["items"]:
        click.echo(f"{item['id']}\t{item['text']}")


_YES = {"y", "yes", "satd", "1"}
_NO = {"n", "no", "nonsatd", "0"}


@session_group.command("label")
@click.argument("session_id")
@click.argument("answers", nargs=-1, required=True)
@click.pass_obj
def session_label(server, session_id, answers):
    """Submit answers as id=y / id=n pairs for the outstanding batch."""
    parsed = {}
    for answer in answers:
        if "=" not in answer:
            raise click.ClickException(f"expected id=y or id=n, got {answer!r}")
        cid, _, value = answer.partition("=")
        value = value.strip().lower()
        if value in _YES:
            parsed[int(cid)] = "SATD"
        elif value in _NO:
            parsed[int(cid)] = "NonSATD"
        else:
            raise click.ClickException(f"unrecognized answer {value!r} for id {cid}")
    with _client(server) as client:
        view = _check(client.post(f"/sessions/{session_id}/labels", json={"answers": parsed}))
    _echo_summary(view)


@session_group.command("override")
@click.argument("session_id")
@click.argument("ids", nargs=-1, required=True, type=int)
@click.pass_obj
def session_override(server, session_id, ids):
    """Mark auto-classified comments as reviewer-rejected false positives."""
    with _client(server) as client:
        view = _check(client.post(f"/sessions/{session_id}/overrides", json={"ids": list(ids)}))
    _echo_summary(view)


@session_group.command("stop")
@click.argument("session_id")
@click.pass_obj
def session_stop(server, session_id):
    with _client(server) as client:
        _echo_summary(_check(client.post(f"/sessions/{session_id}/stop")))


@session_group.command("export")
@click.argument("session_id")
@click.option("-o", "output", default=None, type=click.Path(), help="write CSV here instead of stdout")
@click.pass_obj
def session_export(server, session_id, output):
    """Download the identified SATDs as CSV."""
    with _client(server) as client:
        response = client.get(f"/sessions/{session_id}/export")
        _check(response)
    if output:
        Path(output).write_bytes(response.content)
        click.echo(f"wrote {output}")
    else:
        sys.stdout.write(response.text)


if __name__ == "__main__":
    main()
