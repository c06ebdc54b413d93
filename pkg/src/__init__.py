"""fairshare: two-player bargaining solutions and the S_Delta random-walk solution."""
