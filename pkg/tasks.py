from invoke import task


@task
def test(c, slow=False, cov=False):
    """Run the test suite; slow closed-loop runs are skipped unless --slow is given."""
    args = ["uv run pytest"]
    if not slow:
        args.append('-m "not slow"')
    if cov:
        args.append("--cov --cov-report=term-missing")
    c.run(" ".join(args), pty=True)


@task
def lint(c, fix=False):
    """Check formatting and lint rules with ruff."""
    c.run("uv run ruff format" + ("" if fix else " --check"))
    c.run("uv run ruff check" + (" --fix" if fix else ""))


@task
def check(c):
    """Run Django system checks against the test settings."""
    c.run(
        'uv run python -c "'
        "import os; os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tests.settings'); "
        "from django.core.management import execute_from_command_line; "
        "execute_from_command_line(['manage.py', 'check', 'diabolo'])"
        '"'
    )


@task
def demo(c, out="demo-output"):
    """Generate synthetic traces and evaluate the predictor on them."""
    manage = (
        'uv run python -c "'
        "import os, sys; os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tests.settings'); "
        "from django.core.management import execute_from_command_line; "
        "execute_from_command_line(['manage.py'] + sys.argv[1:])"
        '"'
    )
    c.run(f"{manage} diabolo_generate --count 2 --out {out}/traces")
    c.run(f"{manage} diabolo_evaluate {out}/traces --out {out}/evaluation")
