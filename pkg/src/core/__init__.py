"""
Núcleo da PE-NET.

Este pacote contém as sub-redes ES-NET e SP-NET, a montagem da PE-NET, a
perda composta com peso dinâmico e o ajuste fino do segundo estágio.
"""
