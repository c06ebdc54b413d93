"""Terminal tables and the SVG incentive-region figure."""
