import setuptools
import squeeze

with open("readme.rst", "r") as f:
    long_description = f.read()

setuptools.setup(
    name='squeeze',
    version=squeeze.__version__,
    description="Staged mixed-precision weight quantization with salience-based bit allocation",
    long_description=long_description,
    long_description_content_type="text/x-rst",
    packages=setuptools.find_packages(exclude=('test',
                                               'test.*')),
    install_requires=['pyyaml>=5.3.1',
                      'numpy',
                      'scipy',
                      'pandas'],
    entry_points={
        'console_scripts': ['squeeze=squeeze.cli:main'],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Software Development :: Libraries :: Python Modules',
    ],
    keywords='quantization binarization language models',
)
