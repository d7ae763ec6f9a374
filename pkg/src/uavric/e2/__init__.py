"""E2-style protocol: messages, wire codec, transports, RIC and metric store."""
