"""
Модуль группы команд CLI.

Доменные ошибки превращаются в машиночитаемую строку stderr
`error code=<n> kind=<Class> message=<text>` и код завершения процесса.
"""
import click

from utils.exception_handler.handler import exit_code_for


def error_line(error: BaseException) -> str:
    message = " ".join(str(error).split())
    return f"error code={exit_code_for(error)} kind={error.__class__.__name__} message={message}"


class SeaIceGroup(click.Group):
    """
    Группа команд, переводящая исключения в коды завершения.
    """

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except Exception as error:
            click.echo(error_line(error), err=True)
            ctx.exit(exit_code_for(error))


@click.group(cls=SeaIceGroup)
@click.version_option("1.0.0", prog_name="seaice")
def app():
    """
    Постобработка сезонных ансамблей концентрации морского льда моделью cVAE-CRPS.
    """
