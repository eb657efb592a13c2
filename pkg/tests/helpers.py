from pxkacanov.fem import FemFunction


def random_function(mesh, rng, scale=1.0):
    return FemFunction.from_interior(mesh, scale * rng.standard_normal(mesh.interior.size))
