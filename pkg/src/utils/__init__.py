"""
Módulo de utilidades gerais do retorno.

Este pacote contém logging, configuração e a hierarquia de erros usadas em todo o projeto.
"""
