"""
Redes densas, otimizador, normalização e treinamento em numpy.
"""
