//! Scenario-driven simulation runner (in progress).
