"""ehbalanced - numerical checks that multiples of the Eguchi-Hanson metric are not balanced."""

__version__ = "26.10.01"
