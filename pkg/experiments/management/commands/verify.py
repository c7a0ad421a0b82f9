from experiments.studies import run_verify

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Check the exact discrete identities (duality, energy, moments) of one configuration'

    def run(self, config, **options):
        summary = run_verify(config)
        for name, outcome in summary.items():
            style = self.style.SUCCESS if outcome == 'passed' else self.style.WARNING
            self.stdout.write(style(f'  {name}: {outcome}'))
        return summary
