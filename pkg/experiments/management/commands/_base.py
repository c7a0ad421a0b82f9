import json

from django.core.management.base import BaseCommand, CommandError

from spacetime.exceptions import SpaceTimeError
from experiments.config import load_config
from experiments.exceptions import exit_code_for


class ExperimentCommand(BaseCommand):
    """Shared ``--config/--out`` handling and the structured error contract.

    Failures are written to stderr as ``{"error": {"type", "message", "details"}}``
    and re-raised as CommandError carrying the exit code.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to a JSON run config')
        parser.add_argument('--out', help='Output directory (overrides output.directory)')

    def run(self, config, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], options.get('out'))
            summary = self.run(config, **{k: v for k, v in options.items() if k != 'config'})
        except SpaceTimeError as exc:
            code = exit_code_for(exc)
            self.stderr.write(json.dumps({'error': exc.to_dict()}, sort_keys=True, default=str))
            raise CommandError(exc.message, returncode=code) from exc
        self.stdout.write(json.dumps(summary, indent=2, sort_keys=True, default=str))
        self.stdout.write(self.style.SUCCESS(f'✔ {config.run_id} written to {config.output_dir}'))
        return None
