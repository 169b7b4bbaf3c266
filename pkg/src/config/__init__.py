"""
Configuração padrão dos experimentos de retorno elástico.
"""
