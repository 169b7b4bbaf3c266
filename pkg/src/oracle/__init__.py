"""
Oráculo sintético de retorno elástico e geração dos datasets.

Substitui a simulação por elementos finitos por integração do momento de
flexão elastoplástico sobre a seção anular.
"""
