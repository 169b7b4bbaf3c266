"""
Configuração do pacote Retorno.

Este script configura o pacote para instalação via pip,
definindo metadados e dependências.
"""

from setuptools import setup, find_packages

with open("readme.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="retorno",
    version="0.1.0",
    author="Projeto Retorno",
    description="Previsão do retorno elástico de tubos bimetálicos por redes guiadas pela teoria de seção equivalente",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.10",
    install_requires=[
        "python-dotenv>=1.0.0",
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pandas>=2.0.0",
        "pydantic>=2.4.0",
        "colorlog>=6.7.0",
        "tqdm>=4.65.0",
        "tabulate>=0.9.0",
    ],
    entry_points={
        "console_scripts": [
            "retorno=src.main:main",
        ],
    },
)
