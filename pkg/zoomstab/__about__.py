__version__ = "0.1.0"
__author__ = "The zoomstab developers"
__email__ = "zoomstab@users.noreply.github.com"

__license__ = "GNU General Public License v3.0"
__copyright__ = "2026 %s" % __author__
