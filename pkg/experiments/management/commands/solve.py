from experiments.studies import run_solve

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Forward dG solve of one configuration: checkpoint plus norm table'

    def run(self, config, **options):
        summary = run_solve(config)
        self.stdout.write(self.style.WARNING(summary['guidance']))
        return summary
