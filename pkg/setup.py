from os.path import dirname, join
from setuptools import setup, find_packages


with open(join(dirname(__file__), 'escl_lab/VERSION'), 'rb') as f:
    version = f.read().decode('ascii').strip()


setup(
    name='escl-lab',
    version=version,
    description='Desk-scale equivariant self-contrastive learning of '
                'sentence embeddings',
    license='BSD',
    packages=find_packages(exclude=('tests', 'tests.*')),
    include_package_data=True,
    package_data={'escl_lab': ['VERSION']},
    zip_safe=False,
    python_requires='>=3.8',
    entry_points={
        'console_scripts': ['escl-lab = escl_lab.cli:main'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
    ],
    install_requires=[
        'Scrapy>=2.0.0',
        'numpy>=1.17',
        'scipy>=1.4',
    ],
)
