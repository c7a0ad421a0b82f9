from experiments.studies import REFINE_MODES, run_convergence

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Manufactured-solution convergence ladder with observed orders'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--levels', type=int, default=3)
        parser.add_argument('--refine', choices=REFINE_MODES, default='both')
        parser.add_argument('--parallel', action='store_true', help='Run the levels as a Celery group')

    def run(self, config, **options):
        summary = run_convergence(config, options['levels'], options['refine'], options['parallel'])
        for name, order in summary['finest_orders'].items():
            shown = 'n/a' if order is None else f'{order:.3f}'
            self.stdout.write(f'  order {name}: {shown}')
        return summary
