"""
Command-line launcher: `python policyflow.py mincut --graph data/vf_triangle.txt --source A --sink C --preset valley-free`.
"""

from src.cli import main


if __name__ == "__main__":
    main()
