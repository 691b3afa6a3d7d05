import os
import json

os.environ['R2C_VERBOSITY'] = '2'
os.environ['R2C_THREADS'] = '1'
os.environ['R2C_SEED'] = '0'

# Get the directory of the current file
current_dir = os.path.dirname(__file__)

# Averaged dynamic connectedness tables of the two published systems: cell
# matrices (total and contemporaneous/lagged parts) plus the published aggregates.
system1_path = os.path.join(current_dir, 'data/system1_table.json')
system2_path = os.path.join(current_dir, 'data/system2_table.json')

with open(system1_path, 'r') as f:
    system1_table = json.load(f)

with open(system2_path, 'r') as f:
    system2_table = json.load(f)
