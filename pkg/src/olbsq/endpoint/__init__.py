"""Network endpoints: framed wire protocol, provider daemon, user client and CLI."""
