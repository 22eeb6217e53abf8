"""Entrypoint for ``python -m snn_fault_sim.main``."""

from snn_fault_sim.cli import cli


def main() -> None:
    """Run the faultsim command group."""
    cli()


if __name__ == "__main__":
    main()
