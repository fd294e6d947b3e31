"""Download the NOAA monthly Mauna Loa CO2 record into data/mauna_loa.csv."""

import logging
from pathlib import Path

import click
from rich.logging import RichHandler

from bayesgam.datasets import NOAA_MONTHLY_URL, convert_noaa_monthly, fetch_noaa_monthly
from bayesgam.io import write_table

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "data" / "mauna_loa.csv"


@click.command()
@click.option("--url", default=NOAA_MONTHLY_URL, show_default=True, help="Source CSV")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=DEFAULT_OUT)
def main(url: str, out: Path) -> None:
    """Fetch, convert and write the (time, month, co2) table."""
    logging.basicConfig(level=logging.INFO, format="%(message)s", handlers=[RichHandler()])
    frame = convert_noaa_monthly(fetch_noaa_monthly(url))
    write_table(out, frame)
    click.echo(f"{len(frame)} months, {frame['time'].min():.2f} - {frame['time'].max():.2f}")


if __name__ == "__main__":
    main()
