from streamlit.testing.v1 import AppTest


def test_home_page_renders():
    at = AppTest.from_file("../app.py").run(timeout=60)
    assert not at.exception
    assert at.sidebar.number_input(key="p").value == 1
    assert [tab.label for tab in at.tabs] == ["📐 Curvature", "📊 Isometry dimensions", "🧮 α invariants"]


def test_isometry_dimensions_button():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.button(key="run_dims").click().run(timeout=180)
    assert not at.exception
    assert at.session_state.results["isometry-dims"].status == "ok"
    assert len(at.dataframe) >= 1
    assert any("isometry-dims: ok" in message.value for message in at.success)


def test_alpha_tab():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.selectbox(key="family").set_value("N_ψ (deformed family)").run(timeout=60)
    at.button(key="run_alpha").click().run(timeout=180)
    assert not at.exception
    assert at.session_state.results["alpha"].status == "ok"
    assert any("admissible-nonhomogeneous" in block.value for block in at.markdown)


def test_bad_point_is_reported():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.sidebar.text_input(key="point").set_value("z5=1").run(timeout=60)
    assert not at.exception
    assert len(at.error) == 1


def test_settings_menu():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.radio[0].set_value("Settings").run(timeout=60)
    assert not at.exception
    assert at.header[0].value == "Settings"
    assert at.number_input[0].value == at.session_state.tolerance


def test_settings_page():
    at = AppTest.from_file("../pages/Settings.py").run(timeout=60)
    assert not at.exception
    assert at.session_state.nu_max == 6
    assert at.number_input[1].value == 1729


def test_changing_inputs_clears_results():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.button(key="run_dims").click().run(timeout=180)
    assert "isometry-dims" in at.session_state.results
    at.sidebar.number_input(key="p").set_value(2).run(timeout=60)
    assert not at.exception
    assert "isometry-dims" not in at.session_state.results
    assert not any("isometry-dims: ok" in message.value for message in at.success)


def test_orbit_sweep_button_uses_the_session_seed():
    at = AppTest.from_file("../app.py").run(timeout=60)
    at.session_state.seed = 5
    at.number_input(key="sweep_k").set_value(2).run(timeout=60)
    at.button(key="run_sweep").click().run(timeout=180)
    assert not at.exception
    sweep = at.session_state.results["orbit-sweep"]
    assert sweep.status == "ok"
    assert sweep.values["seed"] == 5
    assert sweep.values["k"] == 2
