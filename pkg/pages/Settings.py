import streamlit as st

from config import load_settings

st.set_page_config(page_title="Settings - Curvature Homogeneity Workbench", layout="wide")

st.header("Settings")

# Initialize session state if not present (direct navigation skips app.py)
defaults = load_settings()
if "tolerance" not in st.session_state:
    st.session_state.tolerance = defaults.tolerance
if "seed" not in st.session_state:
    st.session_state.seed = defaults.seed
if "nu_max" not in st.session_state:
    st.session_state.nu_max = defaults.nu_max

# Tolerance
tolerance = st.number_input(
    "Tolerance",
    min_value=1e-15,
    max_value=1e-3,
    value=st.session_state.tolerance,
    format="%.1e",
    help="Residual accepted for floating-point model isomorphisms."
)
st.session_state.tolerance = tolerance

# Seed
seed = st.number_input(
    "Seed",
    min_value=0,
    value=st.session_state.seed,
    step=1,
    help="Seed for the random vectors of the orbit sweep (CURVHOM_SEED)."
)
st.session_state.seed = int(seed)

# nu_max
nu_max = st.number_input(
    "Largest ν searched",
    min_value=2,
    max_value=12,
    value=st.session_state.nu_max,
    step=1,
    help="The psi classification stops after this many alpha invariants (CURVHOM_NU_MAX)."
)
st.session_state.nu_max = int(nu_max)

st.success("Settings saved automatically.")
