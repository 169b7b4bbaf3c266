"""
Orquestração de experimentos e relatórios.
"""
