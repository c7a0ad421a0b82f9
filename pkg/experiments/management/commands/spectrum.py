from experiments.studies import SPECTRUM_SOURCES, run_spectrum

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Smallest eigenvalue of the linearized Allen-Cahn operator along a solution'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--times', type=float, nargs='+', help='Sample times (default: 11 points on [0, T])')
        parser.add_argument('--source', choices=SPECTRUM_SOURCES, default='solution')

    def run(self, config, **options):
        return run_spectrum(config, options.get('times'), options['source'])
