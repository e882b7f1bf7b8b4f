import logging
from typing import Dict, Optional

import pandas as pd
import plotly.express as px
import streamlit as st

from config import Settings, load_settings
from errors import WorkbenchError
from scenario import ScenarioConfig, TaskResult, TaskSpec, make_config
from workbench import run_task

logger = logging.getLogger(__name__)

# ----------------------------------------------------------------------
# 1️⃣  Configuration – defaults come from the environment
# ----------------------------------------------------------------------
DEFAULTS = load_settings()

FAMILIES = {
    "M_k (standard family)": "Mk",
    "N_ψ (deformed family)": "Npsi",
}

# ----------------------------------------------------------------------
# 2️⃣  Helper functions
# ----------------------------------------------------------------------

def parse_point(text: str) -> Dict[str, str]:
    """'y=1, z1=0' -> {'y': '1', 'z1': '0'}; blank entries are skipped."""
    point = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        name, _, value = piece.partition("=")
        point[name.strip()] = value.strip()
    return point


def current_settings() -> Settings:
    return load_settings(seed=st.session_state.seed, tolerance=st.session_state.tolerance,
                         nu_max=st.session_state.nu_max)


def current_config() -> Optional[ScenarioConfig]:
    family = FAMILIES[st.session_state.family]
    try:
        return make_config(
            name="streamlit",
            p=st.session_state.p,
            family=family,
            k=st.session_state.k if family == "Mk" else None,
            psi=st.session_state.psi if family == "Npsi" else None,
            point=parse_point(st.session_state.point),
        )
    except WorkbenchError as e:
        st.error(f"❌ {e}")
        return None


def run(config: ScenarioConfig, name: str, **params) -> Optional[TaskResult]:
    task = TaskSpec(index=1, name=name, params={key: str(value) for key, value in params.items()})
    logger.info("Running %s for p=%d", name, config.p)
    try:
        result = run_task(config, task, current_settings())
    except WorkbenchError as e:
        st.error(f"❌ {e}")
        return None
    st.session_state.results[name] = result
    return result


def show_status(result: TaskResult):
    if result.status == "ok":
        st.success(f"✅ {result.task}: ok")
    else:
        st.warning(f"⚠️ {result.task}: {result.status}")


def dims_figure(rows: pd.DataFrame):
    long = rows.melt(id_vars="label", value_vars=["computed", "published"], var_name="source",
                     value_name="dimension")
    return px.bar(long, x="label", y="dimension", color="source", barmode="group",
                  title="Isometry group dimensions")


def settings_page():
    st.header("Settings")

    st.session_state.tolerance = st.number_input(
        "Tolerance",
        min_value=1e-15,
        max_value=1e-3,
        value=st.session_state.tolerance,
        format="%.1e",
        help="Residual accepted for floating-point model isomorphisms."
    )
    st.session_state.seed = int(st.number_input(
        "Seed", min_value=0, value=st.session_state.seed, step=1,
        help="Seed for the random vectors of the orbit sweep."
    ))
    st.session_state.nu_max = int(st.number_input(
        "Largest ν searched", min_value=2, max_value=12, value=st.session_state.nu_max, step=1
    ))

    st.success("Settings saved automatically.")


# ----------------------------------------------------------------------
# 3️⃣  Streamlit UI
# ----------------------------------------------------------------------
st.set_page_config(page_title="📐 Curvature Homogeneity Workbench", layout="wide")

page = st.radio("Menu", ["Home", "Settings"], horizontal=True, label_visibility="collapsed")

# Session state initialization
if "results" not in st.session_state:
    st.session_state.results = {}

if "tolerance" not in st.session_state:
    st.session_state.tolerance = DEFAULTS.tolerance

if "seed" not in st.session_state:
    st.session_state.seed = DEFAULTS.seed

if "nu_max" not in st.session_state:
    st.session_state.nu_max = DEFAULTS.nu_max


def reset_results():
    st.session_state.results = {}


def home_page():
    with st.sidebar:
        st.header("Metric")
        st.number_input("p", min_value=1, max_value=3, value=1, step=1, key="p", on_change=reset_results)
        st.selectbox("Family", list(FAMILIES), key="family", on_change=reset_results)
        if FAMILIES[st.session_state.family] == "Mk":
            st.number_input("k", min_value=0, max_value=st.session_state.p + 2, value=0, step=1, key="k",
                            on_change=reset_results)
        else:
            st.text_input("ψ(y)", value="exp(y) + exp(2*y)", key="psi", on_change=reset_results)
        st.text_input("Point", value="", key="point", on_change=reset_results,
                      help="Comma-separated, e.g. y=1, z1=0. Unset coordinates are 0.")

    config = current_config()
    if config is None:
        return

    tab_curvature, tab_dims, tab_alpha = st.tabs(["📐 Curvature", "📊 Isometry dimensions", "🧮 α invariants"])

    # ---- Curvature ----
    with tab_curvature:
        order = st.number_input("Order of ∇ᵏR", min_value=0, max_value=6, value=2, step=1, key="order")
        if st.button("Check closed form", key="run_curvature"):
            run(config, "curvature", order=order, **{"check-closed-form": "true"})
        result = st.session_state.results.get("curvature")
        if result is not None:
            show_status(result)
            st.caption(f"F = {result.values['F']}")
            st.dataframe(pd.DataFrame(result.values.get("closed_form", [])))
            at = result.values.get("at", {})
            if at:
                st.dataframe(pd.DataFrame({"component": list(at), "value": [str(v) for v in at.values()]}))

    # ---- Isometry dimensions ----
    with tab_dims:
        if st.button("Compute isometry dimensions", key="run_dims"):
            with st.spinner("Solving the stabilizer systems…"):
                run(config, "isometry-dims")
        result = st.session_state.results.get("isometry-dims")
        if result is not None:
            show_status(result)
            rows = pd.DataFrame(result.values["rows"])
            st.dataframe(rows)
            st.plotly_chart(dims_figure(rows))

        sweep_k = st.number_input("Orbit sweep order k", min_value=0, max_value=config.p + 2, value=0, step=1,
                                  key="sweep_k")
        if st.button("Run orbit sweep", key="run_sweep"):
            with st.spinner("Sampling vectors…"):
                run(config, "orbit-sweep", k=sweep_k)
        sweep = st.session_state.results.get("orbit-sweep")
        if sweep is not None:
            show_status(sweep)
            st.write(f"Seed {sweep.values['seed']}: {sweep.values['reachable']} reachable, "
                     f"{sweep.values['unreachable']} unreachable, {len(sweep.values['mismatches'])} mismatches")

    # ---- alpha invariants ----
    with tab_alpha:
        if config.family != "Npsi":
            st.info("Choose the N_ψ family to evaluate the α invariants.")
            return
        nu = st.number_input("ν", min_value=2, max_value=6, value=2, step=1, key="nu")
        if st.button("Evaluate α", key="run_alpha"):
            run(config, "alpha", nu=nu)
            run(config, "classify-psi")
        result = st.session_state.results.get("alpha")
        if result is not None:
            show_status(result)
            st.dataframe(pd.DataFrame({
                "quantity": list(result.values) + list(result.residuals),
                "value": [str(v) for v in result.values.values()] + [str(v) for v in result.residuals.values()],
            }))
        verdict = st.session_state.results.get("classify-psi")
        if verdict is not None:
            st.write(f"Verdict: **{verdict.values['verdict']}**")


if page == "Home":
    home_page()
else:
    settings_page()
