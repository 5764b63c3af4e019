import os

import numpy as np
import plotly.express as px
import plotly.graph_objects as go


def write_figure(fig, path):
    """Save a figure as a standalone HTML file next to the CSV artifacts"""
    try:
        fig.write_html(path, include_plotlyjs="cdn", full_html=True)
    except OSError as e:
        raise OSError(f"Error writing figure {path}: {str(e)}") from e
    return path


def profiles_figure(trajectory, count=5):
    """Trace u(x, t) at evenly spaced recorded times"""
    states = trajectory.states
    picks = np.unique(np.linspace(0, len(states) - 1, max(2, count)).round().astype(int))

    fig = go.Figure()
    for index in picks:
        state = states[index]
        fig.add_trace(go.Scatter(
            x=state.u.x,
            y=state.u.values,
            mode='lines',
            name=f"t = {state.t:.3g}",
        ))

    fig.update_layout(
        title="Trace profiles",
        xaxis_title="x",
        yaxis_title="u",
        hovermode='x unified',
    )
    return fig


def diagnostics_figure(diagnostics):
    """Energy, Lyapunov functional and weighted mass over time"""
    long = diagnostics.melt(id_vars="t", value_vars=["energy", "lyapunov", "mass"],
                            var_name="quantity", value_name="value")
    fig = px.line(long, x="t", y="value", color="quantity", title="Diagnostics")
    fig.update_layout(hovermode='x unified')
    return fig


def convergence_figure(table):
    """Sup-error against spacing on log-log axes"""
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=table["spacing"],
        y=table["sup_error"],
        mode='lines+markers',
        name='sup error',
    ))
    fig.update_layout(
        title="Linear benchmark convergence",
        xaxis_title="spacing",
        yaxis_title="sup error",
        xaxis_type="log",
        yaxis_type="log",
    )
    return fig


def flux_decay_figure(metrics):
    """s(R) R log(R/R0) and s(R) R across the sweep"""
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=metrics["R"], y=metrics["products"], mode='lines+markers',
                             name='s(R) R log(R/R0)'))
    fig.add_trace(go.Scatter(x=metrics["R"], y=metrics["s_times_R"], mode='lines+markers',
                             name='s(R) R'))
    fig.add_hline(y=metrics["mass_over_pi"], line_dash="dash", annotation_text="mass / pi")
    fig.update_layout(
        title="Arc flux decay",
        xaxis_title="R",
        yaxis_title="value",
        xaxis_type="log",
        hovermode='x unified',
    )
    return fig


def figure_path(output_dir, name):
    return os.path.join(output_dir, f"{name}.html")
