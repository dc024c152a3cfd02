"""Media attention to landslides abroad: geolocation, news events and salience."""

__version__ = "0.1.0"
