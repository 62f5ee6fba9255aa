import logging
import sys

import click
from pydantic import ValidationError

from ecs_metrology.commands.sweep_commands import COMMANDS
from ecs_metrology.core.config import get_settings
from ecs_metrology.core.exceptions import EXIT_VALIDATION, MetrologyException

# Get settings
settings = get_settings()


class MetrologyCLI(click.Group):
    """Command group whose main() is the global exception handler"""

    def main(self, args=None, prog_name=None, complete_var=None, **extra):
        try:
            result = super().main(
                args=args, prog_name=prog_name, complete_var=complete_var, standalone_mode=False, **extra
            )
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_VALIDATION)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_VALIDATION)
        except MetrologyException as exc:
            click.echo(f"Error: {exc.message}", err=True)
            sys.exit(exc.exit_code)
        except ValidationError as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        sys.exit(result if isinstance(result, int) else 0)


@click.group(cls=MetrologyCLI)
@click.version_option(settings.app_version, prog_name=settings.app_name)
def cli():
    """Phase-estimation bounds for NOON, BAT and entangled coherent states."""


# Include commands
for command in COMMANDS:
    cli.add_command(command)


def main():
    """Console entry point"""
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    cli()


if __name__ == "__main__":
    main()
