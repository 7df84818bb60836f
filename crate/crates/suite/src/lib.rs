//! Holds the `acceptance` test target. It sits in its own package so it runs
//! after every other test binary in the workspace.
