from robnas.data.cell import CanonicalCell, Genotype, Operator

__all__ = ['CanonicalCell', 'Genotype', 'Operator']
