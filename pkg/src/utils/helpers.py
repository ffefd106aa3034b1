"""
Utility helper functions for the clonal interference toolkit
"""
import logging

try:
    import markdown
    MARKDOWN_AVAILABLE = True
except ImportError:
    MARKDOWN_AVAILABLE = False

logger = logging.getLogger(__name__)

PAGE = """<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>{title}</title></head>
<body>
{body}
</body>
</html>
"""


def convert_markdown_to_html(text):
    """Convert markdown text to HTML for display"""
    if not text:
        return text
    if not MARKDOWN_AVAILABLE:
        return f'<pre>{text}</pre>'

    try:
        return markdown.markdown(text, extensions=['extra', 'tables'])
    except Exception as e:
        logger.warning(f'Error converting markdown to HTML: {e}')
        return f'<pre>{text}</pre>'


def render_page(text, title='Clonal interference'):
    """Full HTML page from a markdown body"""
    return PAGE.format(title=title, body=convert_markdown_to_html(text))
