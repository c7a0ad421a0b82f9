from experiments.studies import run_stability_sweep

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Solve one configuration for a descending list of epsilons and tabulate the scaled norms'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--epsilons', type=float, nargs='+', required=True)
        parser.add_argument('--parallel', action='store_true', help='Run the epsilons as a Celery group')

    def run(self, config, **options):
        return run_stability_sweep(config, options['epsilons'], options['parallel'])
