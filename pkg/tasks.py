""" Invoke tasks for testing and building the package.

This is the equivalent of a Makefile.
"""
import toml
from invoke import task

# Load the version from pyproject.toml
with open("pyproject.toml", "r", encoding='utf-8') as f:
    pyproject = toml.load(f)
    version = pyproject["project"]["version"]
    project_name = pyproject["project"]["name"]


@task
def export_requirements(c):
    """Export dependencies to requirements.txt."""
    c.run("poetry export -f requirements.txt --output requirements.txt --without-hashes")


@task
def test(c):
    """Run all unit tests."""
    # test/__init__.py sets the R2C_ environment for the suite
    c.run("python -m unittest -v", pty=True)


@task(pre=[export_requirements, test])
def build(c):
    """Build the wheel into dist/."""
    c.run("pip wheel . --no-deps -w dist")
    print(f"Built {project_name} {version} into dist/.")
