"""
Teoria de seção equivalente para tubos bimetálicos.
"""
